#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gravcollapse/core.hpp"
#include "gravcollapse/grid.hpp"
#include "gravcollapse/grid_state.hpp"
#include "gravcollapse/hamiltonian.hpp"
#include "gravcollapse/spectral.hpp"

namespace gravcollapse {

// The pair (normalized ket, Bohmian point) plus bookkeeping.
struct PropagatorState {
  WaveFunction psi;
  BohmianConfiguration q;
  double t = 0.0;
  std::size_t step_count = 0;
  std::size_t stalled_count = 0;  // velocity evaluations below the density floor
};

// One row of a trajectory record. Base columns are filled by the run loop;
// observers append named columns.
struct RecordRow {
  double t = 0.0;
  std::size_t step = 0;
  std::vector<std::pair<std::string, double>> values;
  void add(std::string name, double v) { values.emplace_back(std::move(name), v); }
};

using Observer = std::function<void(const PropagatorState&, RecordRow&)>;
using RowSink = std::function<void(const RecordRow&)>;

struct RunResult {
  PropagatorState final_state;
  std::vector<RecordRow> records;
};

// Strang-split integrator for the coupled wavefunction / Bohmian system.
// Within one dt the wavefunction advances with the source frozen at a
// midpoint prediction of q, then q advances
// by RK4 with the velocity field interpolated linearly in time between the
// old and new wavefunction.
class Propagator {
 public:
  Propagator(const WaveFunction& shape, ModelParams params, InternalPotentialSpec potential);

  const ModelParams& params() const { return params_; }
  const GridSpec& grid() const { return grid_; }
  const SpectralOps& ops() const { return ops_; }
  const PotentialField& internal_field() const { return internal_; }
  const std::vector<double>& axis_masses() const { return axis_masses_; }

  void set_source_hook(SourcePositionHook hook) { source_hook_ = std::move(hook); }

  // Linear non-Hermitian step followed by renormalization; the norm change
  // is accumulated into psi.log_norm().
  PropagatorState step_unnormalized(const PropagatorState& state) const;
  // Nonlinear normalized flow with the quantum-density counter-term.
  PropagatorState step_normalized(const PropagatorState& state) const;
  // Dispatches on params().flow; in place.
  void step(PropagatorState& state) const;

  // RK4 step of dq/dt = v(q) in the frozen guidance field of state.psi.
  BohmianConfiguration advance_bohmian(const PropagatorState& state) const;
  // Advances many configurations across one step whose wavefunction went
  // from `start` to `end`; the guidance field is linear in time in between.
  void advance_positions(const WaveFunction& start, const WaveFunction& end,
                         std::span<BohmianConfiguration> qs, std::size_t& stalled) const;

  std::size_t step_count_for(double t_max) const;

  // Runs round(t_max / dt) steps recording a row every `cadence` steps
  // (including t = 0). Rows are passed to `sink` as they are produced, so
  // partial output survives an IntegrationError.
  RunResult run(const PropagatorState& initial, std::span<const Observer> observers,
                std::size_t cadence, const RowSink& sink = {}) const;

  // Hermitian and localization potentials on the configuration grid for
  // the current Bohmian point.
  AssembledHamiltonian hamiltonian(const PropagatorState& state) const;

 private:
  enum class Mode { Normalized, Unnormalized };
  void wave_step(PropagatorState& state, Mode mode, const BohmianConfiguration& source_q) const;
  void advance(PropagatorState& state, Mode mode) const;
  void check_finite(const PropagatorState& state, const char* stage) const;
  BohmianConfiguration rk4(const GuidanceField& start, const GuidanceField& end, const BohmianConfiguration& q,
                           std::size_t& stalled) const;

  ModelParams params_;
  GridSpec grid_;
  std::size_t particles_;
  std::vector<double> axis_masses_;
  SpectralOps ops_;
  PotentialField internal_;
  std::vector<cplx> kinetic_phase_;
  SourcePositionHook source_hook_;
};

// Lowest eigenvectors of T + V on small grids by dense diagonalization.
// Returns the normalized eigenvector of the given index (0 = ground) and
// its eigenvalue.
std::pair<WaveFunction, double> dense_eigenstate(const WaveFunction& shape, std::span<const double> potential,
                                                 std::span<const double> axis_masses, double hbar,
                                                 std::size_t index = 0);

// Imaginary-time Strang relaxation of T + V to its ground state.
WaveFunction imaginary_time_ground_state(WaveFunction guess, std::span<const double> potential,
                                         std::span<const double> axis_masses, double hbar, double dtau,
                                         std::size_t max_steps, double tolerance = 1e-13);

// Timestep bound 0.05 hbar / max(max|V|, E_kin) where E_kin is the kinetic
// energy of the highest Fourier mode carrying > 1e-12 of psi's spectral weight.
double recommended_dt(const WaveFunction& psi, std::span<const double> potential,
                      std::span<const double> axis_masses, double hbar);

}  // namespace gravcollapse
