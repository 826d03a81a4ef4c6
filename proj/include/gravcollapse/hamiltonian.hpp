#pragma once

#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "gravcollapse/core.hpp"
#include "gravcollapse/grid.hpp"

namespace gravcollapse {

// Real potential sampled on a grid (configuration space or one-particle space).
using PotentialField = std::vector<double>;

namespace potential {
struct Free {};
// 0.5 m omega^2 x^2 on every axis.
struct Harmonic {
  double omega = 1.0;
};
// barrier * ((x / (separation/2))^2 - 1)^2 on every axis.
struct DoubleWell {
  double barrier = 1.0;
  double separation = 2.0;
};
// -strength / sqrt(|r|^2 + softening^2) acting on each particle.
struct SoftCoulomb {
  double strength = 1.0;
  double softening = 1.0;
};
// -strength / sqrt(|r_n - r_m|^2 + softening^2) summed over pairs n < m.
struct PairwiseSoftCoulomb {
  double strength = 1.0;
  double softening = 1.0;
};
}  // namespace potential

using InternalPotentialSpec = std::variant<potential::Free, potential::Harmonic, potential::DoubleWell,
                                           potential::SoftCoulomb, potential::PairwiseSoftCoulomb>;

void validate(const InternalPotentialSpec& spec);

// V_int on the configuration grid of `shape` (grid, particle count).
PotentialField internal_potential(const InternalPotentialSpec& spec, const WaveFunction& shape,
                                  std::span<const double> masses);

struct GravKernelSpec {
  double softening = 0.25;   // a_soft > 0
  double smear_length = 0.0; // a_L; 0 = point sources
};

// Softened 1/r kernel.
inline double grav_kernel(double distance, double softening) { return 1.0 / (distance + softening); }

// Bohmian mass density. With point sources the field is left empty and
// consumers use the closed-form kernel.
struct MassDensity {
  bool point_sources = true;
  std::vector<double> field;  // one-particle grid, empty for point sources
};

MassDensity bohmian_mass_density(const BohmianConfiguration& q, std::span<const double> grav_masses,
                                 const GravKernelSpec& kernel, const GridSpec& one_particle_grid);

// Potential per unit target mass produced by each source n on the
// one-particle grid: mu_n * (K * n_n)(r). Point sources use the closed
// form; smeared sources use an FFT convolution with the periodic kernel.
std::vector<PotentialField> source_potentials(const BohmianConfiguration& q,
                                              std::span<const double> grav_masses,
                                              const GravKernelSpec& kernel,
                                              const GridSpec& one_particle_grid);

// V_G(r) = -gamma * target_mass * sum_n mu_n K(|r - q_n|) on the
// one-particle grid, optionally excluding one source index.
PotentialField grav_potential_per_particle(const BohmianConfiguration& q,
                                           std::span<const double> grav_masses, double target_mass,
                                           double gamma, const GravKernelSpec& kernel,
                                           const GridSpec& one_particle_grid,
                                           std::ptrdiff_t excluded_source = -1);

// Per-particle one-particle fields whose broadcast sums give the
// configuration-space Hermitian gravity and localization potentials.
struct ParticleFields {
  std::vector<PotentialField> hermitian;     // -gamma mu_n sum_{n' in H_n} mu_n' K
  std::vector<PotentialField> localization;  // eps gamma mu_n sum_{n' in S_n} mu_n' K  (>= 0)
};

ParticleFields gravity_particle_fields(const BohmianConfiguration& q, const ModelParams& params,
                                       const GridSpec& one_particle_grid);

// out[i] += sum_n field_n(r_n(i)) over configuration points i.
void accumulate_broadcast(const GridSpec& config_grid, std::size_t particles,
                          std::span<const PotentialField> per_particle, std::span<double> out);

struct AssembledHamiltonian {
  PotentialField hermitian;      // V_int + V_G (configuration grid)
  PotentialField localization;   // L >= 0 (configuration grid)
  std::vector<double> axis_masses;
};

// H = T + V_herm + i L on the configuration grid. In multi-particle mode
// the Hermitian source excludes each particle's own position; with a
// single (collective) particle the full self-source is used. Localization
// self-terms follow params.localization_self_terms in multi-particle mode.
AssembledHamiltonian assemble_hamiltonian(const WaveFunction& shape, const BohmianConfiguration& q,
                                          const ModelParams& params,
                                          std::span<const double> internal_field);

// Retardation hook: maps the current configuration and time to the source
// configuration used for the potentials. The default is instantaneous.
using SourcePositionHook = std::function<BohmianConfiguration(const BohmianConfiguration&, double)>;

}  // namespace gravcollapse
