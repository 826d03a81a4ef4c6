#include "gravcollapse/propagator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>

#include "gravcollapse/errors.hpp"
#include "json.hpp"

namespace gravcollapse {

namespace {

std::vector<double> masses_per_axis(const WaveFunction& shape, const ModelParams& params) {
  if (params.particle_count() != shape.particle_count())
    throw PreconditionError("Propagator: particle count of params and wavefunction differ");
  std::vector<double> m;
  for (const auto& ax : shape.axes()) m.push_back(params.particle_masses[ax.particle]);
  return m;
}

void apply_factor(WaveFunction& psi, std::span<const cplx> factor, double scalar) {
  const std::size_t n = factor.size();
  for (std::size_t c = 0; c < psi.components(); ++c) {
    auto comp = psi.component(c);
    for (std::size_t i = 0; i < n; ++i) comp[i] *= factor[i] * scalar;
  }
}

void apply_kinetic_phase(WaveFunction& psi, const FftPlan& fft, std::span<const cplx> phase) {
  for (std::size_t c = 0; c < psi.components(); ++c) {
    auto comp = psi.component(c);
    fft.forward(comp);
    for (std::size_t i = 0; i < comp.size(); ++i) comp[i] *= phase[i];
    fft.backward(comp);
  }
}

// Time average of <L> over a potential sub-step of length tau, by Simpson's
// rule on the closed-form sub-flow density rho * exp(2 s L / hbar).
// growth[i] = exp(tau (L_i - L_max) / hbar).
double counter_term(const WaveFunction& psi, std::span<const double> loc, std::span<const double> growth) {
  const std::size_t n = loc.size();
  double a0 = 0.0, b0 = 0.0, a1 = 0.0, b1 = 0.0, a2 = 0.0, b2 = 0.0;
  for (std::size_t c = 0; c < psi.components(); ++c) {
    const auto comp = psi.component(c);
    for (std::size_t i = 0; i < n; ++i) {
      const double rho = std::norm(comp[i]);
      const double g = growth[i];
      a0 += rho;
      b0 += rho * loc[i];
      a1 += rho * g;
      b1 += rho * g * loc[i];
      a2 += rho * g * g;
      b2 += rho * g * g * loc[i];
    }
  }
  return (b0 / a0 + 4.0 * b1 / a1 + b2 / a2) / 6.0;
}

}  // namespace

Propagator::Propagator(const WaveFunction& shape, ModelParams params, InternalPotentialSpec potential)
    : params_(std::move(params)),
      grid_(shape.grid()),
      particles_(shape.particle_count()),
      axis_masses_(masses_per_axis(shape, params_)),
      ops_(grid_, axis_masses_, params_.hbar),
      internal_(internal_potential(potential, shape, params_.particle_masses)) {
  params_.validate();
  const auto& kin = ops_.kinetic_spectrum();
  kinetic_phase_.resize(kin.size());
  for (std::size_t i = 0; i < kin.size(); ++i)
    kinetic_phase_[i] = std::polar(1.0, -params_.dt * kin[i] / params_.hbar);
}

AssembledHamiltonian Propagator::hamiltonian(const PropagatorState& state) const {
  const auto src = source_hook_ ? source_hook_(state.q, state.t) : state.q;
  return assemble_hamiltonian(state.psi, src, params_, internal_);
}

void Propagator::wave_step(PropagatorState& state, Mode mode, const BohmianConfiguration& source_q) const {
  const auto src = source_hook_ ? source_hook_(source_q, state.t + 0.5 * params_.dt) : source_q;
  const auto h = assemble_hamiltonian(state.psi, src, params_, internal_);
  const std::size_t n = grid_.total_points();
  const double tau = 0.5 * params_.dt;
  const double hbar = params_.hbar;
  const double lmax = *std::max_element(h.localization.begin(), h.localization.end());

  std::vector<double> growth(n);
  std::vector<cplx> factor(n);
  for (std::size_t i = 0; i < n; ++i) {
    growth[i] = std::exp(tau * (h.localization[i] - lmax) / hbar);
    factor[i] = std::polar(growth[i], -tau * h.hermitian[i] / hbar);
  }

  auto& psi = state.psi;
  if (mode == Mode::Unnormalized) {
    const double scalar = std::exp(tau * lmax / hbar);
    apply_factor(psi, factor, scalar);
    apply_kinetic_phase(psi, ops_.fft(), kinetic_phase_);
    apply_factor(psi, factor, scalar);
    check_finite(state, "wavefunction");
    const double norm = std::sqrt(psi.norm_squared());
    if (!(norm > 0.0) || !std::isfinite(norm)) check_finite(state, "norm");
    psi.normalize();
    psi.set_log_norm(psi.log_norm() + std::log(norm));
  } else {
    const double c1 = counter_term(psi, h.localization, growth);
    apply_factor(psi, factor, std::exp(tau * (lmax - c1) / hbar));
    apply_kinetic_phase(psi, ops_.fft(), kinetic_phase_);
    const double c2 = counter_term(psi, h.localization, growth);
    apply_factor(psi, factor, std::exp(tau * (lmax - c2) / hbar));
    check_finite(state, "wavefunction");
    psi.set_log_norm(psi.log_norm() + tau * (c1 + c2) / hbar);
  }
}

void Propagator::check_finite(const PropagatorState& state, const char* stage) const {
  const bool amps_ok = state.psi.all_finite();
  const double n2 = amps_ok ? state.psi.norm_squared() : 0.0;
  const bool q_ok = std::all_of(state.q.coords.begin(), state.q.coords.end(),
                                [](double x) { return std::isfinite(x); });
  if (amps_ok && q_ok && n2 > 0.0 && std::isfinite(n2)) return;

  std::size_t bad = 0;
  for (const auto& z : state.psi.amplitudes())
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) ++bad;
  nlohmann::json diag{
      {"category", "integration_failure"},
      {"stage", stage},
      {"step", state.step_count},
      {"t", state.t},
      {"dt", params_.dt},
      {"epsilon", params_.epsilon},
      {"non_finite_amplitudes", bad},
      {"total_amplitudes", state.psi.amplitudes().size()},
      {"q", state.q.coords},
  };
  throw IntegrationError("non-finite state at step " + std::to_string(state.step_count) + " (" + stage + ")",
                         diag.dump());
}

BohmianConfiguration Propagator::rk4(const GuidanceField& start, const GuidanceField& end,
                                     const BohmianConfiguration& q, std::size_t& stalled) const {
  const double dt = params_.dt;
  const std::size_t dims = q.coords.size();
  const bool frozen = &start == &end;
  bool any_stalled = false;
  // velocity at fraction theta of the step, linear in time between the
  // guidance fields at the two ends
  auto eval = [&](const std::vector<double>& x, double theta) {
    if (frozen || theta == 0.0 || theta == 1.0) {
      auto s = (theta == 1.0 ? end : start).velocity(x, dt);
      any_stalled = any_stalled || s.stalled;
      return s.velocity;
    }
    auto a = start.velocity(x, dt);
    const auto b = end.velocity(x, dt);
    any_stalled = any_stalled || a.stalled || b.stalled;
    for (std::size_t k = 0; k < dims; ++k) a.velocity[k] = (1.0 - theta) * a.velocity[k] + theta * b.velocity[k];
    return a.velocity;
  };
  std::vector<double> tmp(dims);
  const auto k1 = eval(q.coords, 0.0);
  for (std::size_t a = 0; a < dims; ++a) tmp[a] = q.coords[a] + 0.5 * dt * k1[a];
  const auto k2 = eval(tmp, 0.5);
  for (std::size_t a = 0; a < dims; ++a) tmp[a] = q.coords[a] + 0.5 * dt * k2[a];
  const auto k3 = eval(tmp, 0.5);
  for (std::size_t a = 0; a < dims; ++a) tmp[a] = q.coords[a] + dt * k3[a];
  const auto k4 = eval(tmp, 1.0);
  BohmianConfiguration out = q;
  for (std::size_t a = 0; a < dims; ++a)
    out.coords[a] += dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
  out.wrap(grid_);
  if (any_stalled) ++stalled;
  return out;
}

BohmianConfiguration Propagator::advance_bohmian(const PropagatorState& state) const {
  if (state.q.coords.size() != grid_.dims())
    throw PreconditionError("advance_bohmian: configuration has wrong dimension");
  GuidanceField field(state.psi, ops_, axis_masses_, params_.hbar);
  std::size_t stalled = 0;
  return rk4(field, field, state.q, stalled);
}

void Propagator::advance_positions(const WaveFunction& start, const WaveFunction& end,
                                   std::span<BohmianConfiguration> qs, std::size_t& stalled) const {
  GuidanceField a(start, ops_, axis_masses_, params_.hbar), b(end, ops_, axis_masses_, params_.hbar);
  for (auto& q : qs) q = rk4(a, b, q, stalled);
}

void Propagator::advance(PropagatorState& state, Mode mode) const {
  std::optional<GuidanceField> start;
  BohmianConfiguration source_q = state.q;
  if (!params_.pin_positions) {
    start.emplace(state.psi, ops_, axis_masses_, params_.hbar);
    // midpoint predictor for the gravitational source
    const auto v = start->velocity(state.q.coords, params_.dt).velocity;
    for (std::size_t a = 0; a < v.size(); ++a) source_q.coords[a] += 0.5 * params_.dt * v[a];
    source_q.wrap(grid_);
  }
  wave_step(state, mode, source_q);
  if (start) {
    GuidanceField end(state.psi, ops_, axis_masses_, params_.hbar);
    state.q = rk4(*start, end, state.q, state.stalled_count);
  }
  ++state.step_count;
  state.t = static_cast<double>(state.step_count) * params_.dt;
  check_finite(state, "bohmian");
}

PropagatorState Propagator::step_unnormalized(const PropagatorState& state) const {
  PropagatorState next = state;
  advance(next, Mode::Unnormalized);
  return next;
}

PropagatorState Propagator::step_normalized(const PropagatorState& state) const {
  if (!state.psi.is_normalized(1e-8))
    throw PreconditionError("step_normalized: wavefunction is not normalized");
  PropagatorState next = state;
  advance(next, Mode::Normalized);
  return next;
}

void Propagator::step(PropagatorState& state) const {
  advance(state, params_.flow == FlowMode::Normalized ? Mode::Normalized : Mode::Unnormalized);
}

std::size_t Propagator::step_count_for(double t_max) const {
  return static_cast<std::size_t>(std::llround(t_max / params_.dt));
}

RunResult Propagator::run(const PropagatorState& initial, std::span<const Observer> observers,
                          std::size_t cadence, const RowSink& sink) const {
  const std::size_t steps = step_count_for(params_.t_max);
  if (cadence == 0 || (steps > 0 && steps % cadence != 0))
    throw PreconditionError("run: observer cadence must divide the step count");
  if (initial.q.coords.size() != grid_.dims())
    throw PreconditionError("run: initial configuration has wrong dimension");

  RunResult result;
  result.final_state = initial;
  auto& state = result.final_state;
  auto record = [&] {
    RecordRow row;
    row.t = state.t;
    row.step = state.step_count;
    for (std::size_t a = 0; a < state.q.coords.size(); ++a) row.add("q" + std::to_string(a), state.q.coords[a]);
    row.add("norm", state.psi.norm_squared());
    row.add("log_norm", state.psi.log_norm());
    row.add("stalled", static_cast<double>(state.stalled_count));
    for (const auto& obs : observers) obs(state, row);
    if (sink) sink(row);
    result.records.push_back(std::move(row));
  };

  record();
  for (std::size_t s = 0; s < steps; ++s) {
    step(state);
    if (state.step_count % cadence == 0) record();
  }
  return result;
}

std::pair<WaveFunction, double> dense_eigenstate(const WaveFunction& shape, std::span<const double> potential,
                                                 std::span<const double> axis_masses, double hbar,
                                                 std::size_t index) {
  const auto& g = shape.grid();
  const std::size_t n = g.total_points();
  if (n > 4096) throw UnsupportedError("dense_eigenstate: grid too large for dense diagonalization");
  SpectralOps ops(g, std::vector<double>(axis_masses.begin(), axis_masses.end()), hbar);
  Eigen::MatrixXcd h(n, n);
  std::vector<cplx> unit(n), col(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(unit.begin(), unit.end(), cplx{0.0, 0.0});
    unit[j] = 1.0;
    ops.apply_kinetic(unit, col);
    for (std::size_t i = 0; i < n; ++i) h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
    h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += potential[j];
  }
  h = 0.5 * (h + h.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
  const auto vec = solver.eigenvectors().col(static_cast<Eigen::Index>(index));
  Eigen::Index peak = 0;
  vec.cwiseAbs().maxCoeff(&peak);
  const cplx phase = std::conj(vec(peak)) / std::abs(vec(peak));

  WaveFunction psi(g, shape.particle_count(), 1);
  auto amps = psi.amplitudes();
  for (std::size_t i = 0; i < n; ++i) amps[i] = vec(static_cast<Eigen::Index>(i)) * phase;
  psi.normalize();
  return {std::move(psi), solver.eigenvalues()(static_cast<Eigen::Index>(index))};
}

WaveFunction imaginary_time_ground_state(WaveFunction psi, std::span<const double> potential,
                                         std::span<const double> axis_masses, double hbar, double dtau,
                                         std::size_t max_steps, double tolerance) {
  const auto& g = psi.grid();
  SpectralOps ops(g, std::vector<double>(axis_masses.begin(), axis_masses.end()), hbar);
  const std::size_t n = g.total_points();
  std::vector<double> half(n);
  for (std::size_t i = 0; i < n; ++i) half[i] = std::exp(-0.5 * dtau * potential[i] / hbar);
  const auto& kin = ops.kinetic_spectrum();
  std::vector<cplx> kfac(n);
  for (std::size_t i = 0; i < n; ++i) kfac[i] = std::exp(-dtau * kin[i] / hbar);

  double last = std::numeric_limits<double>::infinity();
  psi.normalize();
  for (std::size_t s = 0; s < max_steps; ++s) {
    const double before = psi.norm_squared();
    for (std::size_t c = 0; c < psi.components(); ++c) {
      auto comp = psi.component(c);
      for (std::size_t i = 0; i < n; ++i) comp[i] *= half[i];
      ops.fft().forward(comp);
      for (std::size_t i = 0; i < n; ++i) comp[i] *= kfac[i];
      ops.fft().backward(comp);
      for (std::size_t i = 0; i < n; ++i) comp[i] *= half[i];
    }
    const double decay = psi.norm_squared() / before;
    psi.normalize();
    // -hbar/(2 dtau) ln(decay) estimates the energy of the map's dominant mode.
    const double energy = -hbar * std::log(decay) / (2.0 * dtau);
    if (std::abs(energy - last) < tolerance) break;
    last = energy;
  }
  return psi;
}

double recommended_dt(const WaveFunction& psi, std::span<const double> potential,
                      std::span<const double> axis_masses, double hbar) {
  SpectralOps ops(psi.grid(), std::vector<double>(axis_masses.begin(), axis_masses.end()), hbar);
  std::vector<cplx> spec(psi.component(0).begin(), psi.component(0).end());
  ops.fft().forward(spec);
  double total = 0.0;
  for (const auto& z : spec) total += std::norm(z);
  double ekin = 0.0;
  const auto& kin = ops.kinetic_spectrum();
  for (std::size_t i = 0; i < spec.size(); ++i)
    if (std::norm(spec[i]) > 1e-12 * total) ekin = std::max(ekin, kin[i]);
  double vmax = 0.0;
  for (double v : potential) vmax = std::max(vmax, std::abs(v));
  const double scale = std::max(vmax, ekin);
  return scale > 0.0 ? 0.05 * hbar / scale : std::numeric_limits<double>::infinity();
}

}  // namespace gravcollapse
