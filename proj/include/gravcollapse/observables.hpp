#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gravcollapse/core.hpp"
#include "gravcollapse/grid.hpp"
#include "gravcollapse/hamiltonian.hpp"

namespace gravcollapse {

// Axis-aligned half-open box [lower, upper) in configuration space.
struct Region {
  std::string label;
  std::vector<double> lower;
  std::vector<double> upper;
  bool contains(std::span<const double> x) const;
};

// Disjoint labelled regions; whatever they do not cover is "other".
struct BranchRegionSpec {
  std::vector<Region> regions;

  void validate(std::size_t dims) const;
  // "Left" (x_axis < split) and "Right" (x_axis >= split), unbounded elsewhere.
  static BranchRegionSpec halves(const GridSpec& grid, std::size_t axis = 0, double split = 0.0);
};

inline constexpr const char* kOtherRegion = "other";

using BranchWeights = std::vector<std::pair<std::string, double>>;

// Integral of |psi|^2 over each region plus the uncovered remainder "other".
BranchWeights branch_weights(const WaveFunction& psi, const BranchRegionSpec& regions);
double weight_of(const BranchWeights& w, const std::string& label);
// Norm carried by each internal component.
std::vector<double> component_weights(const WaveFunction& psi);

struct EnergyExpectation {
  double internal = 0.0;  // <T + V_int>
  double gravity = 0.0;   // <H_G^0>
  double total() const { return internal + gravity; }
};

EnergyExpectation energy_expectation(const WaveFunction& psi, const BohmianConfiguration& q,
                                     const ModelParams& params, std::span<const double> internal_field);

namespace observable {
struct Identity {};
// Position-diagonal operator given by its values on the configuration grid.
struct PositionField {
  std::vector<double> values;
};
struct Projector {
  Region region;
};
// H_int + H_G^0 with the given internal potential field.
struct Energy {
  std::vector<double> internal_field;
};
// Arbitrary operator in the grid basis (small grids only).
struct DenseMatrix {
  Eigen::MatrixXcd matrix;
};
}  // namespace observable

using ObservableSpec = std::variant<observable::Identity, observable::PositionField, observable::Projector,
                                    observable::Energy, observable::DenseMatrix>;

// Rate of change of <A> due to the localization term alone:
// (2/hbar) Re <(L - <L>) psi | A psi>.
double localization_derivative(const WaveFunction& psi, const BohmianConfiguration& q,
                               const ModelParams& params, const ObservableSpec& a);

// L2 distance on the one-particle grid between the quantum density and the
// Gaussian-smeared empirical density of the snapshot positions (averaged
// over snapshot entries). Without a bandwidth, a quarter of the density's
// peak width (FWHM-derived sigma) is used.
double density_mismatch(const WaveFunction& psi, std::span<const BohmianConfiguration> snapshot,
                        std::optional<double> bandwidth = std::nullopt);

struct ReducedDensityMatrix {
  std::vector<std::size_t> subsystem_axes;
  std::size_t bins = 0;
  Eigen::MatrixXcd matrix;

  double trace() const { return matrix.trace().real(); }
  double purity() const;
  Eigen::VectorXd eigenvalues() const;
};

// Partial trace over the complementary axis of a two-axis grid, followed by
// coarse-graining the kept axis into `bins` contiguous blocks (partial trace
// over the offset within each block). bins must divide the axis size.
ReducedDensityMatrix reduced_density_matrix(const WaveFunction& psi, std::size_t subsystem_axis,
                                            std::size_t bins);

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

}  // namespace gravcollapse
