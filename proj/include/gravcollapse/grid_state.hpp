#pragma once

#include <span>
#include <vector>

#include "gravcollapse/grid.hpp"
#include "gravcollapse/spectral.hpp"

namespace gravcollapse {

// Marginal particle-number density on the one-particle grid: the sum over
// particles of each particle's marginal of |psi|^2. Integrates to N.
// Requires a normalized state and all particles on identical per-dimension
// grids.
std::vector<double> quantum_density(const WaveFunction& psi);

// Probability current (hbar/m) Im(psi* grad psi) marginalized onto the
// one-particle grid; result[k] is the k-th spatial component.
std::vector<std::vector<double>> probability_current(const WaveFunction& psi,
                                                     std::span<const double> masses, double hbar);

// Mass of the particle owning each configuration-space axis.
std::vector<double> axis_masses(const WaveFunction& psi, std::span<const double> masses);

// Periodic multilinear interpolation of a configuration-space field.
double interpolate(const GridSpec& grid, std::span<const double> field, std::span<const double> point);

struct VelocitySample {
  std::vector<double> velocity;  // one entry per configuration-space axis
  bool stalled = false;          // density below the floor; velocity was clamped
};

// Density and current on the configuration grid, frozen for velocity
// evaluation at arbitrary points.
class GuidanceField {
 public:
  GuidanceField(const WaveFunction& psi, const SpectralOps& ops, std::span<const double> axis_masses,
                double hbar);

  // Density floor relative to the peak density.
  static constexpr double kRelativeDensityFloor = 1e-12;

  // v = j/rho at q by multilinear interpolation of j and rho. When rho(q)
  // is below the floor, |v_a| is clamped to box_a / (10 dt).
  VelocitySample velocity(std::span<const double> q, double dt) const;

  const std::vector<double>& density() const { return density_; }
  const std::vector<double>& current(std::size_t axis) const { return current_[axis]; }
  double peak_density() const { return peak_; }

 private:
  GridSpec grid_;
  std::vector<double> density_;
  std::vector<std::vector<double>> current_;
  double peak_ = 0.0;
};

// Convenience wrapper: builds the guidance field for a single evaluation.
VelocitySample bohmian_velocity(const WaveFunction& psi, const BohmianConfiguration& q,
                                std::span<const double> masses, double hbar, double dt);

// Gaussian packet over all configuration axes, |g|^2 ~ exp(-d^2/(2 width^2))
// with d the minimum-image offset from `center`.
struct GaussianPacket {
  std::vector<double> center;
  double width = 1.0;
  std::vector<double> momentum;  // optional wavevector per axis
  cplx amplitude{1.0, 0.0};
};

// Normalized sum of amplitude_b * g_b, each g_b first normalized on the
// grid, so well-separated packets carry weight |amplitude_b|^2 (relative).
WaveFunction gaussian_superposition(const GridSpec& grid, std::size_t particles,
                                    std::span<const GaussianPacket> packets);

// Fraction of the norm within `fraction` of the box edge on any axis.
double edge_weight(const WaveFunction& psi, double fraction = 1.0 / 32.0);

}  // namespace gravcollapse
