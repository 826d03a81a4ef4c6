#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gravcollapse/core.hpp"
#include "gravcollapse/ensemble.hpp"
#include "gravcollapse/grid.hpp"
#include "json.hpp"

namespace gravcollapse {

enum class ScenarioKind {
  EigenstateDrift,
  HydrogenAnalog,
  PointerCat,
  ScalingSweep,
  MassIdenticalSuperposition,
  BipartiteNoSignal,
  TwoBranchOracle,
};

const char* to_string(ScenarioKind k);
std::optional<ScenarioKind> scenario_from_string(const std::string& s);
std::vector<ScenarioKind> all_scenarios();

struct EigenstateDriftParams {
  double omega = 1.0;
  std::size_t level = 0;
  bool coherent = false;       // displaced eigenstate instead of the eigenstate
  double displacement = 1.0;
  std::size_t cadence = 10;
  bool operator==(const EigenstateDriftParams&) const = default;
};

struct HydrogenParams {
  double coulomb = 1.0;             // C in -C / sqrt(r^2 + a^2)
  double coulomb_softening = 1.0;
  std::vector<double> x_eff{1e6, 2e6};
  double relax_dtau = 0.01;
  std::size_t relax_steps = 20000;
  bool operator==(const HydrogenParams&) const = default;
};

// Single collective coordinate in a two-Gaussian superposition.
struct PointerCatParams {
  double width = 1.0;
  double separation = 16.0;
  double weight_left = 0.5;
  std::string force_branch;  // "", "Left" or "Right"
  bool survivor_fidelity = true;
  bool operator==(const PointerCatParams&) const = default;
};

struct ScalingSweepParams {
  std::vector<double> epsilons{1e-3, 1e-2, 1e-1};
  std::vector<double> strengths{1.0, 10.0, 100.0};  // gamma * mu^2
  double steps_per_collapse = 200.0;
  std::vector<double> extra_thresholds{5e-4, 2e-3};
  bool operator==(const ScalingSweepParams&) const = default;
};

struct MassIdenticalParams {
  std::vector<double> displacements{0.0, 0.125, 0.25, 0.5, 16.0};
  double horizon_factor = 1.5;  // multiples of the spatial cat's collapse time
  bool operator==(const MassIdenticalParams&) const = default;
};

struct BipartiteParams {
  double width = 1.0;  // of every packet
  double separation_a = 16.0;
  double separation_b = 16.0;
  double grav_mass_a = 1e-6;
  double grav_mass_b = 1.0;
  double region_shift = 4.0;
  std::size_t bins = 2;
  std::size_t fine_bins = 4;
  std::size_t resamples = 2000;
  double level = 0.99;
  bool operator==(const BipartiteParams&) const = default;
};

struct OracleParams {
  double p = 0.5;
  double lambda_full = 1.0;
  double lambda_empty = 0.0;
  std::size_t samples = 101;
  bool operator==(const OracleParams&) const = default;
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::EigenstateDrift;
  ModelParams model;
  GridSpec grid;
  EnsembleSpec ensemble;
  EigenstateDriftParams eigenstate_drift;
  HydrogenParams hydrogen;
  PointerCatParams pointer_cat;
  ScalingSweepParams scaling_sweep;
  MassIdenticalParams mass_identical;
  BipartiteParams bipartite;
  OracleParams oracle;

  void validate() const;
  bool operator==(const ScenarioSpec&) const = default;
};

// Working defaults for each scenario kind.
ScenarioSpec default_spec(ScenarioKind kind);

struct Series {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  void add(std::vector<double> row) { rows.push_back(std::move(row)); }
};

struct ScenarioReport {
  std::string scenario;
  nlohmann::json summary;
  Series series;
};

ScenarioReport run_scenario(const ScenarioSpec& spec);

ScenarioReport eigenstate_drift(const ScenarioSpec& spec);
ScenarioReport hydrogen_analog(const ScenarioSpec& spec);
ScenarioReport pointer_cat(const ScenarioSpec& spec);
ScenarioReport scaling_sweep(const ScenarioSpec& spec);
ScenarioReport mass_identical_superposition(const ScenarioSpec& spec);
ScenarioReport bipartite_no_signal(const ScenarioSpec& spec);
ScenarioReport two_branch_oracle_report(const ScenarioSpec& spec);

// Closed-form branch weights (full, empty) of a two-branch state whose
// unnormalized amplitudes grow as exp(lambda t).
std::pair<double, double> two_branch_oracle(double p, double lambda_full, double lambda_empty, double t);
// Time at which the full branch reaches weight 1 - eta; +inf if never, 0
// if already there.
double oracle_crossing_time(double p, double lambda_full, double lambda_empty, double eta);

// Pieces of the pointer experiment shared with tests.
Experiment pointer_experiment(const ScenarioSpec& spec);
BohmianConfiguration branch_centre(const ScenarioSpec& spec, const std::string& branch);

struct BranchRates {
  double lambda_full = 0.0;   // <L>/hbar over the branch containing q
  double lambda_empty = 0.0;  // <L>/hbar over the other branch
  double p_full = 0.0;        // initial weight of the branch containing q
  std::string full_label;
};
// Calibrates the oracle rates from the localization field at t = 0.
BranchRates calibrate_branch_rates(const Experiment& exp, const BohmianConfiguration& q);

BipartiteExperiment bipartite_experiment(const ScenarioSpec& spec);

// Coarsens a K'-bin reduced density matrix to K bins (K divides K').
Eigen::MatrixXcd coarsen(const Eigen::MatrixXcd& rho, std::size_t bins);

}  // namespace gravcollapse
