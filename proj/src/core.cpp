#include "gravcollapse/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gravcollapse/errors.hpp"

namespace gravcollapse {

UnitSystem UnitSystem::si() { return {si::hbar, si::grav_const, UnitMode::SI}; }

UnitSystem UnitSystem::natural(double gamma) { return {1.0, gamma, UnitMode::Natural}; }

double ModelParams::grav_mass(std::size_t n) const {
  return grav_masses.empty() ? particle_masses.at(n) : grav_masses.at(n);
}

void ModelParams::validate() const {
  auto fail = [](const std::string& msg) { throw DomainError("ModelParams: " + msg); };
  if (!(epsilon >= 0.0)) fail("epsilon must be >= 0");
  if (!(softening > 0.0)) fail("softening must be > 0");
  if (!(smear_length >= 0.0)) fail("smear_length must be >= 0");
  if (!(dt > 0.0)) fail("dt must be > 0");
  if (!(t_max >= 0.0)) fail("t_max must be >= 0");
  if (!(hbar > 0.0)) fail("hbar must be > 0");
  if (!std::isfinite(grav_strength)) fail("grav_strength must be finite");
  if (particle_masses.empty()) fail("at least one particle mass is required");
  for (double m : particle_masses)
    if (!(m > 0.0)) fail("particle masses must be > 0");
  if (!grav_masses.empty()) {
    if (grav_masses.size() != particle_masses.size())
      fail("grav_masses must have one entry per particle");
    for (double m : grav_masses)
      if (!(m >= 0.0)) fail("grav_masses must be >= 0");
  }
}

double self_grav_energy(double mass, double size, const UnitSystem& units) {
  if (!(mass >= 0.0) || !(size > 0.0))
    throw DomainError("self_grav_energy: mass must be >= 0 and size > 0");
  return units.grav_const * mass * mass / size;
}

double collapse_time_estimate(double epsilon, double mass, double size,
                              const UnitSystem& units) {
  if (!(epsilon >= 0.0)) throw DomainError("collapse_time_estimate: epsilon must be >= 0");
  if (!(mass > 0.0) || !(size > 0.0))
    throw DomainError("collapse_time_estimate: mass and size must be > 0");
  if (epsilon == 0.0) return kNoCollapse;
  return units.hbar * size / (epsilon * units.grav_const * mass * mass);
}

double coulomb_gravity_ratio(const UnitSystem& units) {
  return coulomb_gravity_ratio(units, si::electron_mass, si::proton_mass);
}

double coulomb_gravity_ratio(const UnitSystem& units, double electron_mass,
                             double proton_mass) {
  if (units.mode != UnitMode::SI)
    throw UnsupportedError("coulomb_gravity_ratio: requires SI units");
  if (!(electron_mass > 0.0) || !(proton_mass > 0.0))
    throw DomainError("coulomb_gravity_ratio: masses must be > 0");
  const double coulomb = si::elementary_charge * si::elementary_charge /
                         (4.0 * std::numbers::pi * si::vacuum_permittivity);
  return coulomb / (units.grav_const * electron_mass * proton_mass);
}

double fit_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw DomainError("fit_slope: need at least two (x, y) pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("fit_slope: x values are all identical");
  return sxy / sxx;
}

ScalingCheck fifth_power_scaling_check(double density, std::span<const double> sizes,
                                       double epsilon, const UnitSystem& units) {
  if (!(density > 0.0)) throw DomainError("fifth_power_scaling_check: density must be > 0");
  if (!(epsilon > 0.0)) throw DomainError("fifth_power_scaling_check: epsilon must be > 0");
  std::vector<double> distinct(sizes.begin(), sizes.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2)
    throw DomainError("fifth_power_scaling_check: need at least two distinct sizes");

  ScalingCheck out;
  std::vector<double> log_size, log_tau;
  for (double size : sizes) {
    if (!(size > 0.0)) throw DomainError("fifth_power_scaling_check: sizes must be > 0");
    const double mass = density * size * size * size;
    const double tau = collapse_time_estimate(epsilon, mass, size, units);
    out.points.push_back({size, mass, tau});
    log_size.push_back(std::log(size));
    log_tau.push_back(std::log(tau));
  }
  out.log_slope = fit_slope(log_size, log_tau);
  return out;
}

}  // namespace gravcollapse
