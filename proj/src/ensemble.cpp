#include "gravcollapse/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "gravcollapse/errors.hpp"

namespace gravcollapse {

void EnsembleSpec::validate() const {
  if (n_runs < 1) throw DomainError("EnsembleSpec: n_runs must be >= 1");
  if (!(collapse_threshold > 0.0 && collapse_threshold < 0.5))
    throw DomainError("EnsembleSpec: collapse_threshold must lie in (0, 0.5)");
  if (!(t_max >= 0.0)) throw DomainError("EnsembleSpec: t_max must be >= 0");
}

BranchWeights experiment_weights(const Experiment& exp, const WaveFunction& psi) {
  if (!exp.component_branches) return branch_weights(psi, exp.branches);
  const auto w = component_weights(psi);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  BranchWeights out;
  for (std::size_t c = 0; c < w.size(); ++c) out.emplace_back("c" + std::to_string(c), w[c] / total);
  return out;
}

const OutcomeFrequency& EnsembleResult::outcome(const std::string& label) const {
  for (const auto& o : outcomes)
    if (o.label == label) return o;
  throw DomainError("EnsembleResult: no outcome '" + label + "'");
}

std::size_t worker_count() {
  if (const char* env = std::getenv("GRAVCOLLAPSE_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<BohmianConfiguration> sample_initial_positions(const WaveFunction& psi0, std::size_t n_runs,
                                                           std::uint64_t seed) {
  if (!psi0.is_normalized(1e-10)) throw PreconditionError("sample_initial_positions: psi0 not normalized");
  GridSampler sampler(psi0);
  std::vector<BohmianConfiguration> out;
  out.reserve(n_runs);
  for (std::size_t i = 0; i < n_runs; ++i) {
    Rng rng(derive_seed(seed, i));
    out.push_back(sampler.draw(rng));
  }
  return out;
}

double logit_crossing(double t0, double w0, double t1, double w1, double level) {
  auto logit = [](double w) {
    w = std::clamp(w, 1e-300, 1.0 - 1e-16);
    return std::log(w / (1.0 - w));
  };
  const double l0 = logit(w0), l1 = logit(w1), lt = logit(level);
  if (!(l1 > l0)) return t1;
  return t0 + (t1 - t0) * std::clamp((lt - l0) / (l1 - l0), 0.0, 1.0);
}

RunRecord run_single(const Experiment& exp, const Propagator& prop, const EnsembleSpec& spec,
                     const EnsembleOptions& options, const BohmianConfiguration& q0) {
  RunRecord rec;
  rec.q0 = q0;
  rec.threshold_times.assign(options.extra_thresholds.size(), kNaN);

  PropagatorState state{exp.psi0, q0, 0.0, 0, 0};
  const std::size_t steps = prop.step_count_for(spec.t_max);
  auto weights = experiment_weights(exp, state.psi);

  auto crossing = [&](const BranchWeights& prev, const BranchWeights& cur, double t_prev, double eta,
                      std::string* label) -> double {
    for (std::size_t b = 0; b < cur.size(); ++b) {
      if (cur[b].first == kOtherRegion) continue;
      if (cur[b].second >= 1.0 - eta) {
        if (label) *label = cur[b].first;
        return prev[b].second >= 1.0 - eta ? t_prev
                                           : logit_crossing(t_prev, prev[b].second, state.t, cur[b].second, 1.0 - eta);
      }
    }
    return kNaN;
  };

  // A run may already be collapsed at t = 0.
  {
    std::string label;
    const double t = crossing(weights, weights, 0.0, spec.collapse_threshold, &label);
    if (!std::isnan(t)) {
      rec.outcome = label;
      rec.collapse_time = 0.0;
    }
    for (std::size_t k = 0; k < options.extra_thresholds.size(); ++k)
      if (!std::isnan(crossing(weights, weights, 0.0, options.extra_thresholds[k], nullptr)))
        rec.threshold_times[k] = 0.0;
  }

  auto all_crossed = [&] {
    if (std::isnan(rec.collapse_time)) return false;
    return std::none_of(rec.threshold_times.begin(), rec.threshold_times.end(),
                        [](double t) { return std::isnan(t); });
  };

  try {
    for (std::size_t s = 0; s < steps; ++s) {
      if (options.stop_on_collapse && all_crossed()) break;
      const double t_prev = state.t;
      prop.step(state);
      auto next = experiment_weights(exp, state.psi);
      if (std::isnan(rec.collapse_time)) {
        std::string label;
        const double t = crossing(weights, next, t_prev, spec.collapse_threshold, &label);
        if (!std::isnan(t)) {
          rec.outcome = label;
          rec.collapse_time = t;
        }
      }
      for (std::size_t k = 0; k < options.extra_thresholds.size(); ++k)
        if (std::isnan(rec.threshold_times[k]))
          rec.threshold_times[k] = crossing(weights, next, t_prev, options.extra_thresholds[k], nullptr);
      weights = std::move(next);
    }
  } catch (const IntegrationError& e) {
    rec.outcome = kFailed;
    rec.collapse_time = kNaN;
    rec.error = e.diagnostic();
  }
  rec.final_weights = weights;
  rec.final_time = state.t;
  rec.stalled = state.stalled_count;
  if (rec.outcome != kFailed && options.final_probe) rec.probe = options.final_probe(state);
  return rec;
}

EnsembleResult run_ensemble(const EnsembleSpec& spec, const Experiment& exp, const EnsembleOptions& options) {
  spec.validate();
  for (double eta : options.extra_thresholds)
    if (!(eta > 0.0 && eta < 0.5)) throw DomainError("run_ensemble: thresholds must lie in (0, 0.5)");
  ModelParams params = exp.params;
  params.t_max = spec.t_max;
  const Propagator prop(exp.psi0, params, exp.potential);
  if (!exp.component_branches) exp.branches.validate(exp.psi0.grid().dims());

  std::vector<BohmianConfiguration> q0s;
  if (options.forced_q0)
    q0s.assign(spec.n_runs, *options.forced_q0);
  else
    q0s = sample_initial_positions(exp.psi0, spec.n_runs, spec.base_seed);

  EnsembleResult result;
  result.runs.resize(spec.n_runs);
  const std::size_t workers = options.workers ? options.workers : worker_count();
  parallel_for(spec.n_runs, workers, [&](std::size_t i) {
    result.runs[i] = run_single(exp, prop, spec, options, q0s[i]);
    result.runs[i].index = i;
    result.runs[i].seed = derive_seed(spec.base_seed, i);
  });

  // Aggregation in run-index order.
  std::map<std::string, std::size_t> counts;
  for (const auto& [label, w] : experiment_weights(exp, exp.psi0)) {
    (void)w;
    if (label != kOtherRegion) counts[label] = 0;
  }
  std::vector<double> times;
  for (const auto& r : result.runs) {
    if (r.outcome == kFailed) {
      ++result.failed;
    } else if (r.outcome == kUnresolved) {
      ++result.unresolved;
    } else {
      ++result.resolved;
      ++counts[r.outcome];
      times.push_back(r.collapse_time);
    }
  }
  const std::size_t allowed = spec.n_runs / 100;
  if (result.failed > allowed) {
    std::string diag = "{}";
    for (const auto& r : result.runs)
      if (!r.error.empty()) {
        diag = r.error;
        break;
      }
    throw IntegrationError("run_ensemble: " + std::to_string(result.failed) + " of " + std::to_string(spec.n_runs) +
                               " runs failed (cap 1%)",
                           diag);
  }
  counts[kUnresolved] = result.unresolved;
  counts[kFailed] = result.failed;
  const double n = static_cast<double>(spec.n_runs);
  for (const auto& [label, c] : counts)
    result.outcomes.push_back({label, c, static_cast<double>(c) / n, wilson_interval(c, spec.n_runs, 0.0027)});
  if (!times.empty()) result.median_collapse_time = median(times);
  return result;
}

bool EquilibriumResult::all_pass() const {
  return std::all_of(probes.begin(), probes.end(), [](const EquilibriumProbe& p) { return p.pass; });
}

EquilibriumResult equilibrium_test(const WaveFunction& psi0, const ModelParams& params,
                                   const InternalPotentialSpec& potential, std::size_t n_trajectories,
                                   std::uint64_t seed, std::span<const double> probe_times, double alpha) {
  if (params.epsilon != 0.0) throw PreconditionError("equilibrium_test: requires epsilon = 0");
  bool sourced = false;
  for (std::size_t n = 0; n < params.particle_count(); ++n) sourced = sourced || params.grav_mass(n) != 0.0;
  if (params.grav_strength != 0.0 && sourced)
    throw PreconditionError("equilibrium_test: wavefunction must not depend on the Bohmian point");

  const Propagator prop(psi0, params, potential);
  auto qs = sample_initial_positions(psi0, n_trajectories, seed);
  std::vector<std::size_t> probe_steps;
  for (double t : probe_times) {
    if (t < 0.0) throw DomainError("equilibrium_test: probe times must be >= 0");
    probe_steps.push_back(prop.step_count_for(t));
  }
  std::sort(probe_steps.begin(), probe_steps.end());

  EquilibriumResult out;
  PropagatorState state{psi0, qs.front(), 0.0, 0, 0};
  const auto& g = psi0.grid();
  auto probe = [&] {
    const auto rho = state.psi.density();
    for (std::size_t a = 0; a < g.dims(); ++a) {
      GridMarginalCdf cdf(g, rho, a);
      std::vector<double> xs;
      xs.reserve(qs.size());
      for (const auto& q : qs) xs.push_back(q.coords[a]);
      EquilibriumProbe p;
      p.t = state.t;
      p.axis = a;
      p.statistic = ks_statistic(std::move(xs), [&](double x) { return cdf(x); });
      p.critical = ks_critical_value(qs.size(), alpha);
      p.p_value = ks_p_value(qs.size(), p.statistic);
      p.pass = p.statistic < p.critical;
      out.probes.push_back(p);
    }
  };

  std::size_t next_probe = 0;
  while (next_probe < probe_steps.size() && probe_steps[next_probe] == 0) {
    probe();
    ++next_probe;
  }
  const std::size_t last = probe_steps.empty() ? 0 : probe_steps.back();
  while (state.step_count < last) {
    const WaveFunction before = state.psi;
    prop.step(state);
    prop.advance_positions(before, state.psi, qs, out.stalled);
    while (next_probe < probe_steps.size() && probe_steps[next_probe] == state.step_count) {
      probe();
      ++next_probe;
    }
  }
  return out;
}

const char* to_string(SignalingSetting s) {
  switch (s) {
    case SignalingSetting::CouplingOff: return "coupling-off";
    case SignalingSetting::CouplingOn: return "coupling-on";
    case SignalingSetting::RegionShifted: return "region-shifted";
  }
  return "?";
}

namespace {

// Cyclic translation of axis 1 by `cells` grid points.
WaveFunction roll_axis1(const WaveFunction& psi, std::ptrdiff_t cells) {
  const auto& g = psi.grid();
  WaveFunction out = psi;
  const std::size_t n0 = g.points[0], n1 = g.points[1];
  for (std::size_t c = 0; c < psi.components(); ++c) {
    const auto src = psi.component(c);
    auto dst = out.component(c);
    for (std::size_t i = 0; i < n0; ++i)
      for (std::size_t j = 0; j < n1; ++j) {
        const std::size_t jj = static_cast<std::size_t>(
            (static_cast<std::ptrdiff_t>(j) + cells % static_cast<std::ptrdiff_t>(n1) + static_cast<std::ptrdiff_t>(n1)) %
            static_cast<std::ptrdiff_t>(n1));
        dst[i * n1 + jj] = src[i * n1 + j];
      }
  }
  return out;
}

Eigen::MatrixXcd unflatten(const std::vector<double>& v, std::size_t k) {
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k * k; ++i)
    m(static_cast<Eigen::Index>(i / k), static_cast<Eigen::Index>(i % k)) = cplx(v[2 * i], v[2 * i + 1]);
  return m;
}

}  // namespace

NoSignalingRun no_signaling_experiment(SignalingSetting setting, const BipartiteExperiment& bexp,
                                       const EnsembleSpec& spec) {
  const auto& g = bexp.base.psi0.grid();
  if (g.dims() != 2 || bexp.base.psi0.particle_count() != 2)
    throw PreconditionError("no_signaling_experiment: requires two particles on a two-axis grid");
  Experiment exp = bexp.base;
  switch (setting) {
    case SignalingSetting::CouplingOff: {
      if (exp.params.grav_masses.empty()) exp.params.grav_masses = exp.params.particle_masses;
      exp.params.grav_masses[1] = 0.0;
      break;
    }
    case SignalingSetting::CouplingOn: break;
    case SignalingSetting::RegionShifted: {
      const auto cells = static_cast<std::ptrdiff_t>(std::llround(bexp.region_shift / g.spacing(1)));
      const double shift = static_cast<double>(cells) * g.spacing(1);
      exp.psi0 = roll_axis1(exp.psi0, cells);
      for (auto& r : exp.branches.regions) {
        r.lower[1] += shift;
        r.upper[1] += shift;
      }
      break;
    }
  }

  EnsembleSpec s = spec;
  s.base_seed = derive_seed(spec.base_seed, 0x5e77'0000ULL + static_cast<std::uint64_t>(setting));
  const std::size_t k = bexp.bins;
  EnsembleOptions options;
  options.stop_on_collapse = false;
  options.final_probe = [k](const PropagatorState& st) {
    const auto rho = reduced_density_matrix(st.psi, 0, k);
    std::vector<double> flat(2 * k * k);
    for (std::size_t i = 0; i < k * k; ++i) {
      const cplx z = rho.matrix(static_cast<Eigen::Index>(i / k), static_cast<Eigen::Index>(i % k));
      flat[2 * i] = z.real();
      flat[2 * i + 1] = z.imag();
    }
    return flat;
  };

  NoSignalingRun out;
  out.setting = setting;
  out.ensemble = run_ensemble(s, exp, options);
  out.mean_rho = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (const auto& r : out.ensemble.runs) {
    if (r.probe.empty()) continue;
    auto m = unflatten(r.probe, k);
    out.mean_rho += m;
    out.per_run_purity.push_back((m * m).trace().real());
    out.per_run_rho.push_back(std::move(m));
  }
  if (out.per_run_rho.empty()) throw IntegrationError("no_signaling_experiment: no successful runs", "{}");
  out.mean_rho /= static_cast<double>(out.per_run_rho.size());
  return out;
}

EquivalenceTest trace_distance_test(std::span<const Eigen::MatrixXcd> a, std::span<const Eigen::MatrixXcd> b,
                                    double level, std::size_t resamples, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw PreconditionError("trace_distance_test: empty sample");
  if (!(level > 0.0 && level < 1.0) || resamples < 10) throw DomainError("trace_distance_test: bad level or resamples");
  auto mean_of = [](std::span<const Eigen::MatrixXcd> xs) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(xs[0].rows(), xs[0].cols());
    for (const auto& x : xs) m += x;
    return Eigen::MatrixXcd(m / static_cast<double>(xs.size()));
  };
  const Eigen::MatrixXcd delta = mean_of(a) - mean_of(b);
  EquivalenceTest out;
  out.distance = trace_distance(mean_of(a), mean_of(b));

  Rng rng(derive_seed(seed, 0xb007));
  auto resample_mean = [&](std::span<const Eigen::MatrixXcd> xs) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(xs[0].rows(), xs[0].cols());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(xs.size()));
      m += xs[std::min(j, xs.size() - 1)];
    }
    return Eigen::MatrixXcd(m / static_cast<double>(xs.size()));
  };
  std::vector<double> d(resamples);
  const Eigen::MatrixXcd zero = Eigen::MatrixXcd::Zero(delta.rows(), delta.cols());
  for (auto& x : d) x = trace_distance(resample_mean(a) - resample_mean(b) - delta, zero);
  // identical per-run matrices give a zero quantile; keep summation roundoff inside it
  constexpr double kRoundoff = 1e-12;
  out.critical = std::max(quantile(d, level), kRoundoff);
  const double m = mean(d);
  double v = 0.0;
  for (double x : d) v += (x - m) * (x - m);
  out.standard_error = std::sqrt(v / static_cast<double>(d.size() - 1));
  out.ci = {std::max(0.0, out.distance - out.critical), out.distance + out.critical};
  out.contains_zero = out.distance <= out.critical;
  return out;
}

}  // namespace gravcollapse
