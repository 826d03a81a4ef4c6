#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gravcollapse/core.hpp"
#include "gravcollapse/grid.hpp"
#include "gravcollapse/hamiltonian.hpp"
#include "gravcollapse/observables.hpp"
#include "gravcollapse/propagator.hpp"
#include "gravcollapse/stats.hpp"

namespace gravcollapse {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct EnsembleSpec {
  std::size_t n_runs = 100;
  std::uint64_t base_seed = 1;
  double collapse_threshold = 1e-3;  // eta: collapse when one branch holds 1 - eta
  double t_max = 1.0;
  void validate() const;
  bool operator==(const EnsembleSpec&) const = default;
};

// What a single run propagates: initial state, dynamics and the branch
// decomposition used to declare outcomes.
struct Experiment {
  WaveFunction psi0;
  ModelParams params;  // params.t_max is replaced by the ensemble's t_max
  InternalPotentialSpec potential = potential::Free{};
  BranchRegionSpec branches;
  bool component_branches = false;  // branches are the internal components "c0", "c1", ...
};

BranchWeights experiment_weights(const Experiment& exp, const WaveFunction& psi);

using FinalProbe = std::function<std::vector<double>(const PropagatorState&)>;

struct EnsembleOptions {
  bool stop_on_collapse = true;
  // Further eta values whose crossing times are recorded alongside the
  // primary threshold (the run continues until all are crossed).
  std::vector<double> extra_thresholds;
  std::optional<BohmianConfiguration> forced_q0;
  FinalProbe final_probe;
  std::size_t workers = 0;  // 0: GRAVCOLLAPSE_WORKERS, else 1
};

inline constexpr const char* kUnresolved = "unresolved";
inline constexpr const char* kFailed = "failed";

struct RunRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  BohmianConfiguration q0;
  std::string outcome = kUnresolved;
  double collapse_time = kNaN;
  std::vector<double> threshold_times;  // parallel to extra_thresholds
  BranchWeights final_weights;
  double final_time = 0.0;
  std::size_t stalled = 0;
  std::string error;
  std::vector<double> probe;
};

struct OutcomeFrequency {
  std::string label;
  std::size_t count = 0;
  double frequency = 0.0;
  Interval ci;  // Wilson, three-sigma level
};

struct EnsembleResult {
  std::vector<RunRecord> runs;
  std::vector<OutcomeFrequency> outcomes;
  std::size_t resolved = 0;
  std::size_t unresolved = 0;
  std::size_t failed = 0;
  double median_collapse_time = kNaN;

  const OutcomeFrequency& outcome(const std::string& label) const;
};

std::size_t worker_count();

// Runs `n` independent jobs on the worker pool; job i writes only slot i.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

std::vector<BohmianConfiguration> sample_initial_positions(const WaveFunction& psi0, std::size_t n_runs,
                                                           std::uint64_t seed);

// Time at which the logit of a weight crosses the level, interpolated
// linearly in time between two samples.
double logit_crossing(double t0, double w0, double t1, double w1, double level);

// Propagates one run from q0 and classifies it.
RunRecord run_single(const Experiment& exp, const Propagator& prop, const EnsembleSpec& spec,
                     const EnsembleOptions& options, const BohmianConfiguration& q0);

EnsembleResult run_ensemble(const EnsembleSpec& spec, const Experiment& exp,
                            const EnsembleOptions& options = {});

struct EquilibriumProbe {
  double t = 0.0;
  std::size_t axis = 0;
  double statistic = 0.0;
  double critical = 0.0;
  double p_value = 1.0;
  bool pass = true;
};

struct EquilibriumResult {
  std::vector<EquilibriumProbe> probes;
  std::size_t stalled = 0;
  bool all_pass() const;
};

// Samples trajectories from |psi0|^2, transports them with the shared
// wavefunction and compares every configuration-axis marginal with
// |psi_t|^2 by a KS test at the probe times. The wavefunction must not
// depend on the Bohmian point (epsilon = 0 and no gravitational sources).
EquilibriumResult equilibrium_test(const WaveFunction& psi0, const ModelParams& params,
                                   const InternalPotentialSpec& potential, std::size_t n_trajectories,
                                   std::uint64_t seed, std::span<const double> probe_times,
                                   double alpha = 0.01);

enum class SignalingSetting { CouplingOff, CouplingOn, RegionShifted };
const char* to_string(SignalingSetting s);

// Bipartite experiment on a two-axis grid: axis 0 belongs to A (particle 0),
// axis 1 to B (particle 1).
struct BipartiteExperiment {
  Experiment base;           // coupling-on configuration
  double region_shift = 0.0; // translation of B (and its branch regions) for RegionShifted
  std::size_t bins = 2;      // coarse-graining of A
};

struct NoSignalingRun {
  SignalingSetting setting = SignalingSetting::CouplingOn;
  Eigen::MatrixXcd mean_rho;
  std::vector<Eigen::MatrixXcd> per_run_rho;
  std::vector<double> per_run_purity;
  EnsembleResult ensemble;
};

// Ensemble mean of rho_A at t_max for the given B-side setting; each
// setting draws from its own seed stream.
NoSignalingRun no_signaling_experiment(SignalingSetting setting, const BipartiteExperiment& exp,
                                       const EnsembleSpec& spec);

struct EquivalenceTest {
  double distance = 0.0;          // trace distance of the two mean matrices
  double critical = 0.0;          // bootstrap quantile of the centred distance
  double standard_error = 0.0;    // bootstrap standard deviation of the centred distance
  Interval ci;                    // [max(0, D - critical), D + critical]
  bool contains_zero = false;
};

// Centred bootstrap of the trace distance between two ensemble means.
EquivalenceTest trace_distance_test(std::span<const Eigen::MatrixXcd> a, std::span<const Eigen::MatrixXcd> b,
                                    double level, std::size_t resamples, std::uint64_t seed);

}  // namespace gravcollapse
