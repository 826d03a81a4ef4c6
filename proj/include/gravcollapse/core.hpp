#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace gravcollapse {

enum class UnitMode { SI, Natural };

// Action unit and gravitational coupling. In Natural mode hbar = 1 and
// grav_const is the dimensionless strength gamma used by the dynamics.
struct UnitSystem {
  double hbar = 1.0;
  double grav_const = 1.0;
  UnitMode mode = UnitMode::Natural;

  static UnitSystem si();
  static UnitSystem natural(double gamma);
};

namespace si {
inline constexpr double hbar = 1.0545718e-34;          // J s
inline constexpr double grav_const = 6.674e-11;        // m^3 kg^-1 s^-2
inline constexpr double elementary_charge = 1.602176634e-19;
inline constexpr double vacuum_permittivity = 8.8541878128e-12;
inline constexpr double electron_mass = 9.1093837015e-31;
inline constexpr double proton_mass = 1.67262192369e-27;
}  // namespace si

// Which form of the non-Hermitian evolution the propagator integrates.
enum class FlowMode {
  Normalized,    // nonlinear norm-preserving flow with the quantum-density counter-term
  Unnormalized,  // linear non-Hermitian flow followed by explicit renormalization
};

struct ModelParams {
  double epsilon = 1e-3;        // imaginary part of the coupling, g = 1 - i*epsilon
  double grav_strength = 1.0;   // gamma (natural units)
  double hbar = 1.0;
  std::vector<double> particle_masses{1.0};
  // Gravitational (source) masses; empty means equal to particle_masses.
  std::vector<double> grav_masses;
  double softening = 0.25;      // a_soft of the 1/(s + a_soft) kernel
  double smear_length = 0.0;    // a_L; 0 selects point sources
  double dt = 1e-2;
  double t_max = 1.0;
  std::uint64_t seed = 1;
  bool localization_self_terms = true;
  bool pin_positions = false;   // keep the Bohmian point fixed (diagnostic mode)
  FlowMode flow = FlowMode::Normalized;

  std::size_t particle_count() const { return particle_masses.size(); }
  double grav_mass(std::size_t n) const;
  // Throws DomainError naming the first violated invariant.
  void validate() const;
  bool operator==(const ModelParams&) const = default;
};

inline constexpr double kNoCollapse = std::numeric_limits<double>::infinity();

// |E_sg| ~ G M^2 / L.
double self_grav_energy(double mass, double size, const UnitSystem& units);

// tau ~ hbar / (epsilon |E_sg|); returns kNoCollapse when epsilon == 0.
double collapse_time_estimate(double epsilon, double mass, double size,
                              const UnitSystem& units);

// X = q^2 / (4 pi eps0 G m_e m_p). SI only.
double coulomb_gravity_ratio(const UnitSystem& units);
double coulomb_gravity_ratio(const UnitSystem& units, double electron_mass,
                             double proton_mass);

struct ScalingPoint {
  double size;
  double mass;
  double collapse_time;
};

struct ScalingCheck {
  std::vector<ScalingPoint> points;
  double log_slope;  // least-squares slope of log(tau) against log(size)
};

ScalingCheck fifth_power_scaling_check(double density, std::span<const double> sizes,
                                       double epsilon, const UnitSystem& units);

// Ordinary least-squares slope of y against x.
double fit_slope(std::span<const double> x, std::span<const double> y);

}  // namespace gravcollapse
