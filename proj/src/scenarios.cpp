#include "gravcollapse/scenarios.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "gravcollapse/errors.hpp"
#include "gravcollapse/grid_state.hpp"
#include "gravcollapse/observables.hpp"

namespace gravcollapse {

namespace {

constexpr std::array<std::pair<ScenarioKind, const char*>, 7> kNames{{
    {ScenarioKind::EigenstateDrift, "eigenstate_drift"},
    {ScenarioKind::HydrogenAnalog, "hydrogen_analog"},
    {ScenarioKind::PointerCat, "pointer_cat"},
    {ScenarioKind::ScalingSweep, "scaling_sweep"},
    {ScenarioKind::MassIdenticalSuperposition, "mass_identical_superposition"},
    {ScenarioKind::BipartiteNoSignal, "bipartite_no_signal"},
    {ScenarioKind::TwoBranchOracle, "two_branch_oracle"},
}};

nlohmann::json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return nullptr;
  return x > 0 ? "inf" : "-inf";
}

void require_particles(const ScenarioSpec& spec, std::size_t n, const char* who) {
  if (spec.model.particle_count() != n)
    throw DomainError(std::string(who) + ": model.particle_masses must list " + std::to_string(n) + " particle(s)");
}

}  // namespace

const char* to_string(ScenarioKind k) {
  for (const auto& [kind, name] : kNames)
    if (kind == k) return name;
  return "?";
}

std::optional<ScenarioKind> scenario_from_string(const std::string& s) {
  for (const auto& [kind, name] : kNames)
    if (s == name) return kind;
  return std::nullopt;
}

std::vector<ScenarioKind> all_scenarios() {
  std::vector<ScenarioKind> out;
  for (const auto& [kind, name] : kNames) out.push_back(kind);
  return out;
}

ScenarioSpec default_spec(ScenarioKind kind) {
  ScenarioSpec s;
  s.kind = kind;
  s.ensemble.n_runs = 1;
  switch (kind) {
    case ScenarioKind::EigenstateDrift:
      s.grid = {{256}, {20.0}};
      s.model.particle_masses = {1.0};
      s.model.epsilon = 1e-2;
      s.model.grav_strength = 1e-2;
      s.model.softening = 1.0;
      s.model.dt = 1e-3;
      s.model.t_max = 1.0;
      s.model.pin_positions = true;
      break;
    case ScenarioKind::HydrogenAnalog:
      s.grid = {{64, 64}, {32.0, 32.0}};
      s.model.particle_masses = {1.0, 10.0};
      s.model.epsilon = 1e-3;
      s.model.softening = 1.0;
      s.model.dt = 1e-2;
      s.model.t_max = 2.0;
      break;
    case ScenarioKind::PointerCat:
    case ScenarioKind::ScalingSweep:
    case ScenarioKind::MassIdenticalSuperposition:
      s.grid = {{512}, {64.0}};
      s.model.particle_masses = {1e10};
      s.model.grav_masses = {1.0};
      s.model.grav_strength = 1.0;
      s.model.epsilon = 1e-2;
      s.model.softening = 4.0;
      s.model.dt = 10.0;
      s.model.t_max = 6000.0;
      s.ensemble.n_runs = kind == ScenarioKind::PointerCat ? 400 : 1;
      s.ensemble.t_max = 6000.0;
      break;
    case ScenarioKind::BipartiteNoSignal:
      s.grid = {{64, 64}, {32.0, 32.0}};
      s.model.particle_masses = {10.0, 1000.0};
      s.model.epsilon = 1e-1;
      s.model.grav_strength = 50.0;
      s.model.softening = 2.0;
      s.model.dt = 2e-2;
      s.model.t_max = 4.0;
      s.ensemble.n_runs = 1000;
      s.ensemble.t_max = 4.0;
      break;
    case ScenarioKind::TwoBranchOracle:
      s.grid = {{16}, {1.0}};
      s.model.t_max = 10.0;
      break;
  }
  s.ensemble.base_seed = s.model.seed;
  if (kind != ScenarioKind::PointerCat && kind != ScenarioKind::MassIdenticalSuperposition &&
      kind != ScenarioKind::ScalingSweep && kind != ScenarioKind::BipartiteNoSignal)
    s.ensemble.t_max = s.model.t_max;
  return s;
}

void ScenarioSpec::validate() const {
  grid.validate();
  model.validate();
  ensemble.validate();
  const std::size_t n = model.particle_count();
  if (kind != ScenarioKind::TwoBranchOracle && grid.dims() % n != 0)
    throw DomainError("grid: axis count must be a multiple of the particle count");
  switch (kind) {
    case ScenarioKind::EigenstateDrift:
      require_particles(*this, 1, "eigenstate_drift");
      if (!(eigenstate_drift.omega > 0.0)) throw DomainError("eigenstate_drift.omega must be > 0");
      if (eigenstate_drift.cadence == 0) throw DomainError("eigenstate_drift.cadence must be >= 1");
      break;
    case ScenarioKind::HydrogenAnalog:
      require_particles(*this, 2, "hydrogen_analog");
      if (grid.dims() != 2) throw DomainError("hydrogen_analog: grid must have two axes");
      if (hydrogen.x_eff.empty()) throw DomainError("hydrogen_analog.x_eff must not be empty");
      for (double x : hydrogen.x_eff)
        if (!(x > 0.0)) throw DomainError("hydrogen_analog.x_eff entries must be > 0");
      if (!(hydrogen.coulomb > 0.0) || !(hydrogen.coulomb_softening > 0.0))
        throw DomainError("hydrogen_analog: coulomb and coulomb_softening must be > 0");
      break;
    case ScenarioKind::PointerCat:
    case ScenarioKind::ScalingSweep:
    case ScenarioKind::MassIdenticalSuperposition:
      require_particles(*this, 1, "pointer");
      if (grid.dims() != 1) throw DomainError("pointer: grid must have one axis");
      if (!(pointer_cat.width > 0.0) || !(pointer_cat.separation > 0.0) ||
          !(pointer_cat.separation < 0.5 * grid.box[0]))
        throw DomainError("pointer_cat: need width > 0 and 0 < separation < box/2");
      if (!(pointer_cat.weight_left > 0.0 && pointer_cat.weight_left < 1.0))
        throw DomainError("pointer_cat.weight_left must lie in (0, 1)");
      if (!pointer_cat.force_branch.empty() && pointer_cat.force_branch != "Left" &&
          pointer_cat.force_branch != "Right")
        throw DomainError("pointer_cat.force_branch must be empty, Left or Right");
      if (kind == ScenarioKind::ScalingSweep) {
        if (scaling_sweep.epsilons.empty() || scaling_sweep.strengths.empty())
          throw DomainError("scaling_sweep: epsilons and strengths must be non-empty");
        for (double e : scaling_sweep.epsilons)
          if (!(e > 0.0)) throw DomainError("scaling_sweep.epsilons must be > 0");
        for (double v : scaling_sweep.strengths)
          if (!(v > 0.0)) throw DomainError("scaling_sweep.strengths must be > 0");
        if (!(scaling_sweep.steps_per_collapse >= 4.0))
          throw DomainError("scaling_sweep.steps_per_collapse must be >= 4");
        for (double eta : scaling_sweep.extra_thresholds)
          if (!(eta > 0.0 && eta < 0.5)) throw DomainError("scaling_sweep.extra_thresholds must lie in (0, 0.5)");
      }
      if (kind == ScenarioKind::MassIdenticalSuperposition) {
        if (mass_identical.displacements.empty()) throw DomainError("mass_identical.displacements must not be empty");
        for (double d : mass_identical.displacements)
          if (!(d >= 0.0 && d < 0.5 * grid.box[0])) throw DomainError("mass_identical.displacements must lie in [0, box/2)");
        if (!(mass_identical.horizon_factor > 0.0)) throw DomainError("mass_identical.horizon_factor must be > 0");
      }
      break;
    case ScenarioKind::BipartiteNoSignal:
      require_particles(*this, 2, "bipartite_no_signal");
      if (grid.dims() != 2) throw DomainError("bipartite_no_signal: grid must have two axes");
      if (bipartite.bins == 0 || bipartite.fine_bins == 0 || bipartite.fine_bins % bipartite.bins != 0 ||
          grid.points[0] % bipartite.fine_bins != 0)
        throw DomainError("bipartite_no_signal: bins must divide fine_bins, which must divide the A axis");
      if (!(bipartite.level > 0.0 && bipartite.level < 1.0) || bipartite.resamples < 10)
        throw DomainError("bipartite_no_signal: level in (0,1) and resamples >= 10 required");
      if (!(bipartite.width > 0.0)) throw DomainError("bipartite_no_signal.width must be > 0");
      break;
    case ScenarioKind::TwoBranchOracle:
      if (!(oracle.p > 0.0 && oracle.p < 1.0)) throw DomainError("two_branch_oracle.p must lie in (0, 1)");
      if (oracle.samples < 2) throw DomainError("two_branch_oracle.samples must be >= 2");
      break;
  }
}

std::pair<double, double> two_branch_oracle(double p, double lambda_full, double lambda_empty, double t) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("two_branch_oracle: p must lie in (0, 1)");
  if (!(t >= 0.0)) throw DomainError("two_branch_oracle: t must be >= 0");
  // Logistic form, evaluated through the log-odds to avoid overflow.
  const double z = std::log(p / (1.0 - p)) + 2.0 * (lambda_full - lambda_empty) * t;
  const double w = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  const double e = z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
  return {w, e};
}

double oracle_crossing_time(double p, double lambda_full, double lambda_empty, double eta) {
  const double target = std::log((1.0 - eta) / eta);
  const double start = std::log(p / (1.0 - p));
  if (start >= target) return 0.0;
  const double rate = 2.0 * (lambda_full - lambda_empty);
  if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
  return (target - start) / rate;
}

Experiment pointer_experiment(const ScenarioSpec& spec) {
  const auto& pc = spec.pointer_cat;
  const double half = 0.5 * pc.separation;
  const std::vector<GaussianPacket> packets{
      {{-half}, pc.width, {}, std::sqrt(pc.weight_left)},
      {{half}, pc.width, {}, std::sqrt(1.0 - pc.weight_left)},
  };
  Experiment exp;
  exp.psi0 = gaussian_superposition(spec.grid, 1, packets);
  exp.params = spec.model;
  exp.branches = BranchRegionSpec::halves(spec.grid, 0, 0.0);
  return exp;
}

BohmianConfiguration branch_centre(const ScenarioSpec& spec, const std::string& branch) {
  const double half = 0.5 * spec.pointer_cat.separation;
  if (branch == "Left") return {{-half}};
  if (branch == "Right") return {{half}};
  throw DomainError("branch_centre: unknown branch '" + branch + "'");
}

BranchRates calibrate_branch_rates(const Experiment& exp, const BohmianConfiguration& q) {
  const auto h = assemble_hamiltonian(exp.psi0, q, exp.params,
                                      internal_potential(exp.potential, exp.psi0, exp.params.particle_masses));
  const auto& g = exp.psi0.grid();
  const std::size_t n = g.total_points();
  const double hbar = exp.params.hbar;
  struct Acc {
    std::string label;
    double w = 0.0;
    double wl = 0.0;
    bool has_q = false;
  };
  std::vector<Acc> acc;

  if (exp.component_branches) {
    for (std::size_t c = 0; c < exp.psi0.components(); ++c) {
      Acc a{"c" + std::to_string(c)};
      const auto comp = exp.psi0.component(c);
      for (std::size_t i = 0; i < n; ++i) {
        a.w += std::norm(comp[i]);
        a.wl += std::norm(comp[i]) * h.localization[i];
      }
      acc.push_back(a);
    }
    // The full component is the one the localization field favours.
    std::size_t best = 0;
    for (std::size_t c = 1; c < acc.size(); ++c)
      if (acc[c].wl / acc[c].w > acc[best].wl / acc[best].w) best = c;
    acc[best].has_q = true;
  } else {
    const auto rho = exp.psi0.density();
    std::vector<double> x(g.dims());
    for (const auto& r : exp.branches.regions) acc.push_back({r.label, 0.0, 0.0, r.contains(q.coords)});
    for (std::size_t i = 0; i < n; ++i) {
      coordinates_of(g, i, x);
      for (std::size_t r = 0; r < exp.branches.regions.size(); ++r)
        if (exp.branches.regions[r].contains(x)) {
          acc[r].w += rho[i];
          acc[r].wl += rho[i] * h.localization[i];
          break;
        }
    }
  }
  if (acc.size() != 2) throw PreconditionError("calibrate_branch_rates: need exactly two branches");
  const std::size_t full = acc[0].has_q ? 0 : (acc[1].has_q ? 1 : 2);
  if (full == 2) throw PreconditionError("calibrate_branch_rates: q lies in no branch");
  const auto& f = acc[full];
  const auto& e = acc[1 - full];
  BranchRates out;
  out.full_label = f.label;
  out.lambda_full = f.wl / f.w / hbar;
  out.lambda_empty = e.wl / e.w / hbar;
  out.p_full = f.w / (f.w + e.w);
  return out;
}

ScenarioReport eigenstate_drift(const ScenarioSpec& spec) {
  spec.validate();
  const auto& ed = spec.eigenstate_drift;
  WaveFunction shape(spec.grid, 1);
  BohmianConfiguration q{std::vector<double>(spec.grid.dims(), 0.0)};
  const InternalPotentialSpec pot = potential::Harmonic{ed.omega};
  const auto vint = internal_potential(pot, shape, spec.model.particle_masses);

  // Eigenstate of the Hermitian part with the source at the trap centre.
  const auto h = assemble_hamiltonian(shape, q, spec.model, vint);
  WaveFunction psi;
  double eigenvalue = kNaN;
  if (spec.grid.total_points() <= 4096) {
    auto [state, e] = dense_eigenstate(shape, h.hermitian, h.axis_masses, spec.model.hbar, ed.level);
    psi = std::move(state);
    eigenvalue = e;
  } else {
    if (ed.level != 0) throw UnsupportedError("eigenstate_drift: excited states need a grid of <= 4096 points");
    WaveFunction guess = gaussian_superposition(spec.grid, 1, std::vector<GaussianPacket>{
        {std::vector<double>(spec.grid.dims(), 0.0), std::sqrt(spec.model.hbar / (2.0 * spec.model.particle_masses[0] * ed.omega))}});
    psi = imaginary_time_ground_state(guess, h.hermitian, h.axis_masses, spec.model.hbar,
                                      0.1 * spec.model.dt + 1e-3, 200000, 1e-14);
  }
  if (ed.coherent) {
    const auto cells = static_cast<std::ptrdiff_t>(std::llround(ed.displacement / spec.grid.spacing(0)));
    WaveFunction moved = psi;
    const auto strides = spec.grid.strides();
    const std::size_t n0 = spec.grid.points[0];
    const auto src = psi.amplitudes();
    auto dst = moved.amplitudes();
    for (std::size_t i = 0; i < src.size(); ++i) {
      const std::size_t j0 = (i / strides[0]) % n0;
      const std::size_t k0 = static_cast<std::size_t>((static_cast<std::ptrdiff_t>(j0) + cells % static_cast<std::ptrdiff_t>(n0) +
                                                       static_cast<std::ptrdiff_t>(n0)) % static_cast<std::ptrdiff_t>(n0));
      dst[i + (k0 - j0) * strides[0]] = src[i];
    }
    psi = std::move(moved);
  }

  ModelParams params = spec.model;
  Propagator prop(psi, params, pot);
  const std::size_t steps = prop.step_count_for(params.t_max);
  std::size_t cadence = std::min<std::size_t>(ed.cadence, std::max<std::size_t>(steps, 1));
  while (steps > 0 && steps % cadence != 0) --cadence;

  ScenarioReport rep;
  rep.scenario = to_string(spec.kind);
  rep.series.columns = {"t", "E_int", "E_grav", "E_total", "norm", "q0"};
  std::vector<Observer> obs{[&](const PropagatorState& st, RecordRow& row) {
    const auto e = energy_expectation(st.psi, st.q, params, prop.internal_field());
    row.add("E_int", e.internal);
    row.add("E_grav", e.gravity);
    row.add("E_total", e.total());
  }};
  const auto result = prop.run({psi, q, 0.0, 0, 0}, obs, cadence);
  auto value = [](const RecordRow& r, const std::string& k) {
    for (const auto& [name, v] : r.values)
      if (name == k) return v;
    return kNaN;
  };
  const double e0 = value(result.records.front(), "E_total");
  double max_rate = 0.0, max_dev = 0.0;
  for (std::size_t i = 0; i < result.records.size(); ++i) {
    const auto& r = result.records[i];
    const double e = value(r, "E_total");
    rep.series.add({r.t, value(r, "E_int"), value(r, "E_grav"), e, value(r, "norm"), value(r, "q0")});
    max_dev = std::max(max_dev, std::abs(e - e0));
    if (i > 0) {
      const double dt = r.t - result.records[i - 1].t;
      max_rate = std::max(max_rate, std::abs(e - value(result.records[i - 1], "E_total")) / dt);
    }
  }
  const double threshold = 1e-6 * std::abs(e0);
  rep.summary = {
      {"scenario", rep.scenario},
      {"initial_energy", e0},
      {"dense_eigenvalue", num(eigenvalue)},
      {"max_energy_rate", max_rate},
      {"max_energy_deviation", max_dev},
      {"relative_energy_deviation", max_dev / std::abs(e0)},
      {"rate_threshold", threshold},
      {"coherent", ed.coherent},
      {"pinned", params.pin_positions},
      {"within_threshold", max_rate < threshold},
      {"steps", steps},
      {"stalled_steps", result.final_state.stalled_count},
  };
  return rep;
}

ScenarioReport hydrogen_analog(const ScenarioSpec& spec) {
  spec.validate();
  const auto& hp = spec.hydrogen;
  const InternalPotentialSpec pot = potential::PairwiseSoftCoulomb{hp.coulomb, hp.coulomb_softening};
  WaveFunction shape(spec.grid, 2);
  const auto vint = internal_potential(pot, shape, spec.model.particle_masses);
  const auto am = axis_masses(shape, spec.model.particle_masses);

  // Translation-invariant guess along the centre-of-mass direction; the
  // relaxation then only has to resolve the relative coordinate.
  WaveFunction guess(spec.grid, 2);
  guess.fill([&](std::size_t, std::span<const double> x) {
    const double r = periodic_delta(x[0], x[1], spec.grid.box[0]);
    return cplx(std::exp(-r * r / 8.0), 0.0);
  });
  guess.normalize();
  const auto ground = imaginary_time_ground_state(guess, vint, am, spec.model.hbar, hp.relax_dtau, hp.relax_steps);

  Rng rng(derive_seed(spec.model.seed, 0));
  const auto q0 = GridSampler(ground).draw(rng);
  const double me = spec.model.particle_masses[0], mp = spec.model.particle_masses[1];

  struct Outcome {
    std::vector<double> density;
    double energy;
  };
  auto evolve = [&](double gamma) {
    ModelParams params = spec.model;
    params.grav_strength = gamma;
    params.grav_masses.clear();
    Propagator prop(ground, params, pot);
    PropagatorState st{ground, q0, 0.0, 0, 0};
    const std::size_t steps = prop.step_count_for(params.t_max);
    for (std::size_t s = 0; s < steps; ++s) prop.step(st);
    return Outcome{st.psi.density(), energy_expectation(st.psi, st.q, params, vint).total()};
  };

  const auto ref = evolve(0.0);
  double ref_norm = 0.0;
  for (double v : ref.density) ref_norm += v * v;
  ref_norm = std::sqrt(ref_norm);

  ScenarioReport rep;
  rep.scenario = to_string(spec.kind);
  rep.series.columns = {"x_eff", "gamma", "density_shift", "energy_shift"};
  nlohmann::json runs = nlohmann::json::array();
  std::vector<double> xs, ds, es;
  for (double x : hp.x_eff) {
    const double gamma = hp.coulomb / (x * me * mp);
    const auto o = evolve(gamma);
    double d = 0.0;
    for (std::size_t i = 0; i < o.density.size(); ++i) d += (o.density[i] - ref.density[i]) * (o.density[i] - ref.density[i]);
    const double dshift = std::sqrt(d) / ref_norm;
    const double eshift = std::abs(o.energy - ref.energy) / std::abs(ref.energy);
    xs.push_back(x);
    ds.push_back(dshift);
    es.push_back(eshift);
    rep.series.add({x, gamma, dshift, eshift});
    runs.push_back({{"x_eff", x}, {"gamma", gamma}, {"density_shift", dshift}, {"energy_shift", eshift}});
  }
  // Linear response: shift * X is constant; carry it to the physical ratio.
  const double x_real = coulomb_gravity_ratio(UnitSystem::si());
  const double extrap_d = ds.front() * xs.front() / x_real;
  const double extrap_e = es.front() * xs.front() / x_real;
  rep.summary = {
      {"scenario", rep.scenario},
      {"ground_energy", ref.energy},
      {"q0", q0.coords},
      {"runs", runs},
      {"physical_ratio", x_real},
      {"extrapolated_density_shift", extrap_d},
      {"extrapolated_energy_shift", extrap_e},
      {"extrapolated_below_1e-30", extrap_d < 1e-30 && extrap_e < 1e-30},
  };
  if (xs.size() >= 2) {
    rep.summary["density_shift_ratio"] = ds[0] / ds[1];
    rep.summary["energy_shift_ratio"] = es[0] / es[1];
    rep.summary["x_eff_ratio"] = xs[1] / xs[0];
    rep.summary["density_log_slope"] = fit_slope(std::vector<double>{std::log(xs[0]), std::log(xs[1])},
                                                 std::vector<double>{std::log(ds[0]), std::log(ds[1])});
  }
  return rep;
}

namespace {

double fidelity(const WaveFunction& a, const WaveFunction& b) {
  cplx s{};
  const auto x = a.amplitudes(), y = b.amplitudes();
  for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
  const double dv = a.grid().cell_volume();
  return std::norm(s * dv) / (a.norm_squared() * b.norm_squared());
}

WaveFunction unflatten_state(const WaveFunction& shape, const std::vector<double>& flat) {
  WaveFunction out = shape;
  auto amps = out.amplitudes();
  for (std::size_t i = 0; i < amps.size(); ++i) amps[i] = cplx(flat[2 * i], flat[2 * i + 1]);
  return out;
}

int outcome_code(const std::string& label) {
  if (label == "Left" || label == "c0") return 0;
  if (label == "Right" || label == "c1") return 1;
  if (label == kFailed) return -2;
  return -1;
}

}  // namespace

ScenarioReport pointer_cat(const ScenarioSpec& spec) {
  spec.validate();
  const auto& pc = spec.pointer_cat;
  Experiment exp = pointer_experiment(spec);
  EnsembleOptions options;
  if (!pc.force_branch.empty()) options.forced_q0 = branch_centre(spec, pc.force_branch);
  if (pc.survivor_fidelity)
    options.final_probe = [](const PropagatorState& st) {
      std::vector<double> flat;
      flat.reserve(2 * st.psi.amplitudes().size());
      for (const auto& z : st.psi.amplitudes()) {
        flat.push_back(z.real());
        flat.push_back(z.imag());
      }
      return flat;
    };
  const auto result = run_ensemble(spec.ensemble, exp, options);

  ModelParams params = exp.params;
  params.t_max = spec.ensemble.t_max;
  const Propagator prop(exp.psi0, params, exp.potential);
  const double half = 0.5 * pc.separation;

  ScenarioReport rep;
  rep.scenario = to_string(spec.kind);
  rep.series.columns = {"run", "q0", "outcome", "collapse_time", "oracle_time", "inverse_rate_gap", "fidelity",
                        "final_weight_left", "stalled"};
  std::vector<double> ratios, fids, gaps;
  for (const auto& r : result.runs) {
    const auto rates = calibrate_branch_rates(exp, r.q0);
    const double t_oracle = oracle_crossing_time(rates.p_full, rates.lambda_full, rates.lambda_empty,
                                                 spec.ensemble.collapse_threshold);
    const double gap = 1.0 / (rates.lambda_full - rates.lambda_empty);
    double fid = kNaN;
    if (pc.survivor_fidelity && !r.probe.empty() && (r.outcome == "Left" || r.outcome == "Right")) {
      const auto final_state = unflatten_state(exp.psi0, r.probe);
      const double centre = r.outcome == "Left" ? -half : half;
      const std::vector<GaussianPacket> lone_packet{{{centre}, pc.width}};
      PropagatorState lone{gaussian_superposition(spec.grid, 1, lone_packet), r.q0, 0.0, 0, 0};
      const auto steps = prop.step_count_for(r.final_time);
      for (std::size_t s = 0; s < steps; ++s) prop.step(lone);
      fid = fidelity(final_state, lone.psi);
      fids.push_back(fid);
    }
    if (!std::isnan(r.collapse_time) && std::isfinite(t_oracle) && t_oracle > 0.0) {
      ratios.push_back(r.collapse_time / t_oracle);
      gaps.push_back(gap);
    }
    rep.series.add({static_cast<double>(r.index), r.q0.coords[0], static_cast<double>(outcome_code(r.outcome)),
                    r.collapse_time, t_oracle, gap, fid, weight_of(r.final_weights, "Left"),
                    static_cast<double>(r.stalled)});
  }
  nlohmann::json outcomes = nlohmann::json::object();
  for (const auto& o : result.outcomes)
    outcomes[o.label] = {{"count", o.count}, {"frequency", o.frequency}, {"ci", {o.ci.lower, o.ci.upper}}};
  rep.summary = {
      {"scenario", rep.scenario},
      {"n_runs", result.runs.size()},
      {"weight_left", pc.weight_left},
      {"collapse_threshold", spec.ensemble.collapse_threshold},
      {"outcomes", outcomes},
      {"resolved", result.resolved},
      {"unresolved", result.unresolved},
      {"failed", result.failed},
      {"unresolved_flag", result.unresolved > 0},
      {"median_collapse_time", num(result.median_collapse_time)},
      {"median_time_over_oracle", ratios.empty() ? nlohmann::json(nullptr) : num(median(ratios))},
      {"median_inverse_rate_gap", gaps.empty() ? nlohmann::json(nullptr) : num(median(gaps))},
      {"min_survivor_fidelity", fids.empty() ? nlohmann::json(nullptr) : num(*std::min_element(fids.begin(), fids.end()))},
  };
  return rep;
}

ScenarioReport scaling_sweep(const ScenarioSpec& spec) {
  spec.validate();
  const auto& sw = spec.scaling_sweep;
  const double mu = spec.model.grav_mass(0);
  if (!(mu > 0.0)) throw DomainError("scaling_sweep: the pointer needs a gravitational mass > 0");

  ScenarioReport rep;
  rep.scenario = to_string(spec.kind);
  rep.series.columns = {"epsilon", "strength", "dt", "oracle_time", "collapse_time"};
  for (double eta : sw.extra_thresholds) rep.series.columns.push_back("collapse_time_eta_" + std::to_string(eta));

  std::vector<double> log_x, log_t;
  std::vector<std::vector<double>> log_t_extra(sw.extra_thresholds.size());
  nlohmann::json points = nlohmann::json::array();
  for (double eps : sw.epsilons)
    for (double strength : sw.strengths) {
      ScenarioSpec s = spec;
      s.model.epsilon = eps;
      s.model.grav_strength = strength / (mu * mu);
      Experiment exp = pointer_experiment(s);
      const auto q0 = branch_centre(s, "Left");
      const auto rates = calibrate_branch_rates(exp, q0);
      const double t_oracle =
          oracle_crossing_time(rates.p_full, rates.lambda_full, rates.lambda_empty, s.ensemble.collapse_threshold);
      double t_need = t_oracle;
      for (double eta : sw.extra_thresholds)
        t_need = std::max(t_need, oracle_crossing_time(rates.p_full, rates.lambda_full, rates.lambda_empty, eta));
      exp.params.dt = t_oracle / sw.steps_per_collapse;
      EnsembleSpec es = s.ensemble;
      es.n_runs = 1;
      es.t_max = 3.0 * t_need;
      exp.params.t_max = es.t_max;
      const Propagator prop(exp.psi0, exp.params, exp.potential);
      EnsembleOptions opt;
      opt.extra_thresholds = sw.extra_thresholds;
      const auto r = run_single(exp, prop, es, opt, q0);
      if (std::isnan(r.collapse_time) ||
          std::any_of(r.threshold_times.begin(), r.threshold_times.end(), [](double t) { return std::isnan(t); }))
        throw IntegrationError("scaling_sweep: run unresolved at epsilon=" + std::to_string(eps) +
                                   " strength=" + std::to_string(strength),
                               r.error.empty() ? "{}" : r.error);
      std::vector<double> row{eps, strength, exp.params.dt, t_oracle, r.collapse_time};
      for (std::size_t k = 0; k < sw.extra_thresholds.size(); ++k) {
        row.push_back(r.threshold_times[k]);
        log_t_extra[k].push_back(std::log(r.threshold_times[k]));
      }
      rep.series.add(row);
      log_x.push_back(std::log(eps * strength));
      log_t.push_back(std::log(r.collapse_time));
      points.push_back({{"epsilon", eps}, {"strength", strength}, {"collapse_time", r.collapse_time},
                        {"oracle_time", t_oracle}, {"threshold_times", r.threshold_times}});
    }
  if (log_x.size() < 2) throw IntegrationError("scaling_sweep: need at least two resolved points", "{}");
  const double span = (*std::max_element(log_x.begin(), log_x.end()) - *std::min_element(log_x.begin(), log_x.end())) /
                      std::log(10.0);
  const double slope = fit_slope(log_x, log_t);
  nlohmann::json extra = nlohmann::json::array();
  for (std::size_t k = 0; k < sw.extra_thresholds.size(); ++k)
    extra.push_back({{"eta", sw.extra_thresholds[k]}, {"slope", fit_slope(log_x, log_t_extra[k])}});

  // Closed-form counterpart at constant density.
  const std::vector<double> sizes{1e-6, 1e-5, 1e-4};
  const auto fifth = fifth_power_scaling_check(1000.0, sizes, 1e-3, UnitSystem::si());
  rep.summary = {
      {"scenario", rep.scenario},
      {"points", points},
      {"slope", slope},
      {"decades", span},
      {"slope_within_tolerance", std::abs(slope + 1.0) <= 0.05},
      {"threshold_slopes", extra},
      {"fifth_power_slope", fifth.log_slope},
  };
  return rep;
}

ScenarioReport mass_identical_superposition(const ScenarioSpec& spec) {
  spec.validate();
  const auto& mi = spec.mass_identical;
  const double eta = spec.ensemble.collapse_threshold;

  // Reference: the spatial cat with the pointer separation, q in Left.
  Experiment cat = pointer_experiment(spec);
  const auto q_cat = branch_centre(spec, "Left");
  const auto cat_rates = calibrate_branch_rates(cat, q_cat);
  const double t_est = oracle_crossing_time(cat_rates.p_full, cat_rates.lambda_full, cat_rates.lambda_empty, eta);
  EnsembleSpec es = spec.ensemble;
  es.n_runs = 1;
  es.t_max = std::max(spec.ensemble.t_max, 3.0 * t_est);
  cat.params.t_max = es.t_max;
  const Propagator cat_prop(cat.psi0, cat.params, cat.potential);
  const auto cat_run = run_single(cat, cat_prop, es, {}, q_cat);
  if (std::isnan(cat_run.collapse_time))
    throw IntegrationError("mass_identical_superposition: reference cat did not collapse", "{}");
  const double horizon = mi.horizon_factor * cat_run.collapse_time;

  // Cat weights on the horizon.
  EnsembleSpec hs = es;
  hs.t_max = horizon;
  EnsembleOptions full_run;
  full_run.stop_on_collapse = false;
  Experiment cat_h = cat;
  cat_h.params.t_max = horizon;
  const Propagator cat_h_prop(cat_h.psi0, cat_h.params, cat_h.potential);
  const auto cat_h_run = run_single(cat_h, cat_h_prop, hs, full_run, q_cat);
  const double cat_final = weight_of(cat_h_run.final_weights, "Left");

  ScenarioReport rep;
  rep.scenario = to_string(spec.kind);
  rep.series.columns = {"displacement", "weight_drift", "log_ratio_change", "collapse_time"};
  nlohmann::json rows = nlohmann::json::array();
  double zero_drift = kNaN, matched_ratio = kNaN;
  for (double d : mi.displacements) {
    Experiment exp;
    exp.params = spec.model;
    exp.params.t_max = horizon;
    exp.component_branches = true;
    exp.psi0 = WaveFunction(spec.grid, 1, 2);
    const std::vector<GaussianPacket> p0{{{-0.5 * d}, spec.pointer_cat.width}};
    const std::vector<GaussianPacket> p1{{{0.5 * d}, spec.pointer_cat.width}};
    const auto g0 = gaussian_superposition(spec.grid, 1, p0);
    const auto g1 = gaussian_superposition(spec.grid, 1, p1);
    auto c0 = exp.psi0.component(0);
    auto c1 = exp.psi0.component(1);
    const double r = std::sqrt(0.5);
    for (std::size_t i = 0; i < c0.size(); ++i) {
      c0[i] = r * g0.amplitudes()[i];
      c1[i] = r * g1.amplitudes()[i];
    }
    exp.psi0.normalize();
    const BohmianConfiguration q{{-0.5 * d}};
    const Propagator prop(exp.psi0, exp.params, exp.potential);
    const auto w_start = component_weights(exp.psi0);
    const auto run = run_single(exp, prop, hs, full_run, q);
    if (run.outcome == kFailed) throw IntegrationError("mass_identical_superposition: run failed", run.error);
    const double w0 = weight_of(run.final_weights, "c0");
    const double w1 = weight_of(run.final_weights, "c1");
    const double drift = std::abs(w0 - w_start[0]);
    const double log_change = std::log(w0 / w1) - std::log(w_start[0] / w_start[1]);
    rep.series.add({d, drift, log_change, run.collapse_time});
    rows.push_back({{"displacement", d}, {"weight_drift", drift}, {"log_ratio_change", log_change},
                    {"collapse_time", num(run.collapse_time)}});
    if (d == 0.0) zero_drift = drift;
    if (std::abs(d - spec.pointer_cat.separation) < 1e-12 && !std::isnan(run.collapse_time))
      matched_ratio = run.collapse_time / cat_run.collapse_time;
  }
  rep.summary = {
      {"scenario", rep.scenario},
      {"horizon", horizon},
      {"cat_collapse_time", cat_run.collapse_time},
      {"cat_final_weight", cat_final},
      {"cat_collapsed", cat_final >= 1.0 - eta},
      {"identical_profile_drift", num(zero_drift)},
      {"separated_rate_ratio", num(matched_ratio)},
      {"displacements", rows},
  };
  return rep;
}

Eigen::MatrixXcd coarsen(const Eigen::MatrixXcd& rho, std::size_t bins) {
  const auto k = static_cast<std::size_t>(rho.rows());
  if (bins == 0 || k % bins != 0) throw DomainError("coarsen: bins must divide the matrix size");
  const std::size_t r = k / bins;
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(bins));
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t j = 0; j < bins; ++j)
      for (std::size_t s = 0; s < r; ++s)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
            rho(static_cast<Eigen::Index>(i * r + s), static_cast<Eigen::Index>(j * r + s));
  return out;
}

BipartiteExperiment bipartite_experiment(const ScenarioSpec& spec) {
  const auto& bp = spec.bipartite;
  const double ha = 0.5 * bp.separation_a, hb = 0.5 * bp.separation_b;
  const std::vector<GaussianPacket> packets{
      {{-ha, -hb}, bp.width},
      {{ha, hb}, bp.width},
  };
  BipartiteExperiment out;
  out.base.psi0 = gaussian_superposition(spec.grid, 2, packets);
  out.base.params = spec.model;
  out.base.params.grav_masses = {bp.grav_mass_a, bp.grav_mass_b};
  const double inf = std::numeric_limits<double>::infinity();
  out.base.branches.regions = {
      {"Left", {-inf, -inf}, {inf, 0.0}},
      {"Right", {-inf, 0.0}, {inf, inf}},
  };
  out.region_shift = bp.region_shift;
  out.bins = bp.fine_bins;
  return out;
}

ScenarioReport bipartite_no_signal(const ScenarioSpec& spec) {
  spec.validate();
  const auto& bp = spec.bipartite;
  const auto exp = bipartite_experiment(spec);
  const std::array<SignalingSetting, 3> settings{SignalingSetting::CouplingOff, SignalingSetting::CouplingOn,
                                                 SignalingSetting::RegionShifted};
  std::vector<NoSignalingRun> runs;
  for (auto s : settings) runs.push_back(no_signaling_experiment(s, exp, spec.ensemble));

  ScenarioReport rep;
  rep.scenario = to_string(spec.kind);
  rep.series.columns = {"setting", "run", "outcome", "collapse_time", "purity"};
  nlohmann::json per_setting = nlohmann::json::array();
  for (std::size_t si = 0; si < runs.size(); ++si) {
    const auto& run = runs[si];
    std::vector<double> collapsed_purity;
    std::size_t k = 0;
    for (const auto& r : run.ensemble.runs) {
      double purity = kNaN;
      if (!r.probe.empty()) {
        const auto coarse = coarsen(run.per_run_rho[k++], bp.bins);
        purity = (coarse * coarse).trace().real();
        if (r.outcome == "Left" || r.outcome == "Right") collapsed_purity.push_back(purity);
      }
      rep.series.add({static_cast<double>(si), static_cast<double>(r.index), static_cast<double>(outcome_code(r.outcome)),
                      r.collapse_time, purity});
    }
    const auto coarse_mean = coarsen(run.mean_rho, bp.bins);
    per_setting.push_back({
        {"setting", to_string(run.setting)},
        {"resolved", run.ensemble.resolved},
        {"unresolved", run.ensemble.unresolved},
        {"failed", run.ensemble.failed},
        {"mean_rho_diagonal", {coarse_mean(0, 0).real(), coarse_mean(1, 1).real()}},
        {"min_collapsed_purity", collapsed_purity.empty() ? nlohmann::json(nullptr)
                                                          : nlohmann::json(*std::min_element(collapsed_purity.begin(), collapsed_purity.end()))},
        {"median_collapsed_purity", collapsed_purity.empty() ? nlohmann::json(nullptr) : nlohmann::json(median(collapsed_purity))},
    });
  }

  nlohmann::json table = nlohmann::json::array();
  bool all_contain_zero = true;
  for (std::size_t bins : {bp.bins, bp.fine_bins}) {
    for (std::size_t a = 0; a < runs.size(); ++a)
      for (std::size_t b = a + 1; b < runs.size(); ++b) {
        std::vector<Eigen::MatrixXcd> xa, xb;
        for (const auto& m : runs[a].per_run_rho) xa.push_back(coarsen(m, bins));
        for (const auto& m : runs[b].per_run_rho) xb.push_back(coarsen(m, bins));
        const auto t = trace_distance_test(xa, xb, bp.level, bp.resamples, derive_seed(spec.ensemble.base_seed, 77 + a * 3 + b));
        all_contain_zero = all_contain_zero && t.contains_zero;
        table.push_back({{"bins", bins},
                         {"a", to_string(runs[a].setting)},
                         {"b", to_string(runs[b].setting)},
                         {"distance", t.distance},
                         {"critical", t.critical},
                         {"standard_error", t.standard_error},
                         {"ci", {t.ci.lower, t.ci.upper}},
                         {"contains_zero", t.contains_zero}});
      }
  }
  rep.summary = {
      {"scenario", rep.scenario},
      {"n_runs", spec.ensemble.n_runs},
      {"level", bp.level},
      {"settings", per_setting},
      {"distances", table},
      {"all_contain_zero", all_contain_zero},
  };
  return rep;
}

ScenarioReport two_branch_oracle_report(const ScenarioSpec& spec) {
  spec.validate();
  const auto& op = spec.oracle;
  ScenarioReport rep;
  rep.scenario = to_string(spec.kind);
  rep.series.columns = {"t", "w_full", "w_empty", "ode_residual"};
  const double rate = 2.0 * (op.lambda_full - op.lambda_empty);
  const double t_max = spec.model.t_max;
  const double h = 1e-5 / std::max(std::abs(rate), 1e-3);
  double max_res = 0.0;
  for (std::size_t i = 0; i < op.samples; ++i) {
    const double t = t_max * static_cast<double>(i) / static_cast<double>(op.samples - 1);
    const auto [w, e] = two_branch_oracle(op.p, op.lambda_full, op.lambda_empty, t);
    const double tm = std::max(0.0, t - h);
    const double dw = (two_branch_oracle(op.p, op.lambda_full, op.lambda_empty, t + h).first -
                       two_branch_oracle(op.p, op.lambda_full, op.lambda_empty, tm).first) /
                      (t + h - tm);
    const double res = std::abs(dw - rate * w * (1.0 - w));
    if (t > h) max_res = std::max(max_res, res);
    rep.series.add({t, w, e, res});
  }
  rep.summary = {
      {"scenario", rep.scenario},
      {"p", op.p},
      {"lambda_full", op.lambda_full},
      {"lambda_empty", op.lambda_empty},
      {"crossing_time", num(oracle_crossing_time(op.p, op.lambda_full, op.lambda_empty, spec.ensemble.collapse_threshold))},
      {"max_ode_residual", max_res},
  };
  return rep;
}

ScenarioReport run_scenario(const ScenarioSpec& spec) {
  switch (spec.kind) {
    case ScenarioKind::EigenstateDrift: return eigenstate_drift(spec);
    case ScenarioKind::HydrogenAnalog: return hydrogen_analog(spec);
    case ScenarioKind::PointerCat: return pointer_cat(spec);
    case ScenarioKind::ScalingSweep: return scaling_sweep(spec);
    case ScenarioKind::MassIdenticalSuperposition: return mass_identical_superposition(spec);
    case ScenarioKind::BipartiteNoSignal: return bipartite_no_signal(spec);
    case ScenarioKind::TwoBranchOracle: return two_branch_oracle_report(spec);
  }
  throw UnsupportedError("run_scenario: unknown kind");
}

}  // namespace gravcollapse
