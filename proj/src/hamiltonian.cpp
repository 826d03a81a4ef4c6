#include "gravcollapse/hamiltonian.hpp"

#include <cmath>
#include <numbers>

#include "gravcollapse/errors.hpp"
#include "gravcollapse/spectral.hpp"

namespace gravcollapse {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double min_image_distance(std::span<const double> r, std::span<const double> q, const GridSpec& grid) {
  double s2 = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double d = periodic_delta(r[k], q[k], grid.box[k]);
    s2 += d * d;
  }
  return std::sqrt(s2);
}

}  // namespace

void validate(const InternalPotentialSpec& spec) {
  std::visit(overloaded{
                 [](const potential::Free&) {},
                 [](const potential::Harmonic& h) {
                   if (!(h.omega > 0.0)) throw DomainError("Harmonic: omega must be > 0");
                 },
                 [](const potential::DoubleWell& w) {
                   if (!(w.barrier > 0.0) || !(w.separation > 0.0))
                     throw DomainError("DoubleWell: barrier and separation must be > 0");
                 },
                 [](const potential::SoftCoulomb& c) {
                   if (!(c.strength >= 0.0) || !(c.softening > 0.0))
                     throw DomainError("SoftCoulomb: strength >= 0 and softening > 0 required");
                 },
                 [](const potential::PairwiseSoftCoulomb& c) {
                   if (!(c.strength >= 0.0) || !(c.softening > 0.0))
                     throw DomainError("PairwiseSoftCoulomb: strength >= 0 and softening > 0 required");
                 },
             },
             spec);
}

PotentialField internal_potential(const InternalPotentialSpec& spec, const WaveFunction& shape,
                                  std::span<const double> masses) {
  validate(spec);
  const auto& g = shape.grid();
  const std::size_t n = g.total_points();
  const std::size_t d = shape.dims_per_particle();
  const std::size_t particles = shape.particle_count();
  if (masses.size() != particles) throw PreconditionError("internal_potential: one mass per particle");
  PotentialField v(n, 0.0);
  std::vector<double> x(g.dims());
  for (std::size_t i = 0; i < n; ++i) {
    coordinates_of(g, i, x);
    v[i] = std::visit(
        overloaded{
            [](const potential::Free&) { return 0.0; },
            [&](const potential::Harmonic& h) {
              double s = 0.0;
              for (std::size_t a = 0; a < g.dims(); ++a)
                s += 0.5 * masses[a / d] * h.omega * h.omega * x[a] * x[a];
              return s;
            },
            [&](const potential::DoubleWell& w) {
              double s = 0.0;
              const double half = 0.5 * w.separation;
              for (std::size_t a = 0; a < g.dims(); ++a) {
                const double u = (x[a] / half) * (x[a] / half) - 1.0;
                s += w.barrier * u * u;
              }
              return s;
            },
            [&](const potential::SoftCoulomb& c) {
              double s = 0.0;
              for (std::size_t p = 0; p < particles; ++p) {
                double r2 = 0.0;
                for (std::size_t k = 0; k < d; ++k) r2 += x[p * d + k] * x[p * d + k];
                s -= c.strength / std::sqrt(r2 + c.softening * c.softening);
              }
              return s;
            },
            [&](const potential::PairwiseSoftCoulomb& c) {
              double s = 0.0;
              for (std::size_t p = 0; p < particles; ++p)
                for (std::size_t r = p + 1; r < particles; ++r) {
                  double r2 = 0.0;
                  for (std::size_t k = 0; k < d; ++k) {
                    const double dd = periodic_delta(x[p * d + k], x[r * d + k], g.box[k]);
                    r2 += dd * dd;
                  }
                  s -= c.strength / std::sqrt(r2 + c.softening * c.softening);
                }
              return s;
            },
        },
        spec);
  }
  return v;
}

namespace {

// Normalized Gaussian of width a_L centred at q, renormalized on the grid.
std::vector<double> gaussian_density(std::span<const double> q, double width, const GridSpec& grid) {
  const std::size_t n = grid.total_points();
  std::vector<double> f(n);
  std::vector<double> r(grid.dims());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    coordinates_of(grid, i, r);
    const double s = min_image_distance(r, q, grid);
    f[i] = std::exp(-(s * s) / (width * width));
    sum += f[i];
  }
  const double scale = 1.0 / (sum * grid.cell_volume());
  for (auto& v : f) v *= scale;
  return f;
}

}  // namespace

MassDensity bohmian_mass_density(const BohmianConfiguration& q, std::span<const double> grav_masses,
                                 const GravKernelSpec& kernel, const GridSpec& one_particle_grid) {
  MassDensity out;
  if (kernel.smear_length <= 0.0) return out;
  out.point_sources = false;
  const std::size_t d = one_particle_grid.dims();
  out.field.assign(one_particle_grid.total_points(), 0.0);
  for (std::size_t s = 0; s < grav_masses.size(); ++s) {
    const auto g = gaussian_density(q.position(s, d), kernel.smear_length, one_particle_grid);
    for (std::size_t i = 0; i < g.size(); ++i) out.field[i] += grav_masses[s] * g[i];
  }
  return out;
}

std::vector<PotentialField> source_potentials(const BohmianConfiguration& q,
                                              std::span<const double> grav_masses,
                                              const GravKernelSpec& kernel,
                                              const GridSpec& one_particle_grid) {
  if (!(kernel.softening > 0.0)) throw DomainError("GravKernelSpec: softening must be > 0");
  const auto& g = one_particle_grid;
  const std::size_t d = g.dims();
  const std::size_t n = g.total_points();
  std::vector<PotentialField> out(grav_masses.size(), PotentialField(n, 0.0));
  std::vector<double> r(d);

  if (kernel.smear_length <= 0.0) {
    for (std::size_t s = 0; s < grav_masses.size(); ++s) {
      const auto qs = q.position(s, d);
      for (std::size_t i = 0; i < n; ++i) {
        coordinates_of(g, i, r);
        out[s][i] = grav_masses[s] * grav_kernel(min_image_distance(r, qs, g), kernel.softening);
      }
    }
    return out;
  }

  // Kernel sampled at index displacements in FFT order.
  FftPlan fft(g);
  std::vector<cplx> kernel_hat(n);
  const auto strides = g.strides();
  for (std::size_t i = 0; i < n; ++i) {
    double s2 = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const std::size_t j = (i / strides[k]) % g.points[k];
      const double disp = periodic_delta(static_cast<double>(j) * g.spacing(k), 0.0, g.box[k]);
      s2 += disp * disp;
    }
    kernel_hat[i] = grav_kernel(std::sqrt(s2), kernel.softening);
  }
  fft.forward(kernel_hat);
  std::vector<cplx> buf(n);
  const double dv = g.cell_volume();
  for (std::size_t s = 0; s < grav_masses.size(); ++s) {
    const auto dens = gaussian_density(q.position(s, d), kernel.smear_length, g);
    for (std::size_t i = 0; i < n; ++i) buf[i] = dens[i];
    fft.forward(buf);
    for (std::size_t i = 0; i < n; ++i) buf[i] *= kernel_hat[i];
    fft.backward(buf);
    for (std::size_t i = 0; i < n; ++i) out[s][i] = grav_masses[s] * dv * buf[i].real();
  }
  return out;
}

PotentialField grav_potential_per_particle(const BohmianConfiguration& q,
                                           std::span<const double> grav_masses, double target_mass,
                                           double gamma, const GravKernelSpec& kernel,
                                           const GridSpec& one_particle_grid,
                                           std::ptrdiff_t excluded_source) {
  const auto sources = source_potentials(q, grav_masses, kernel, one_particle_grid);
  PotentialField v(one_particle_grid.total_points(), 0.0);
  for (std::size_t s = 0; s < sources.size(); ++s) {
    if (static_cast<std::ptrdiff_t>(s) == excluded_source) continue;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= gamma * target_mass * sources[s][i];
  }
  return v;
}

ParticleFields gravity_particle_fields(const BohmianConfiguration& q, const ModelParams& params,
                                       const GridSpec& one_particle_grid) {
  const std::size_t particles = params.particle_count();
  std::vector<double> mu(particles);
  for (std::size_t n = 0; n < particles; ++n) mu[n] = params.grav_mass(n);
  const GravKernelSpec kernel{params.softening, params.smear_length};
  const auto sources = source_potentials(q, mu, kernel, one_particle_grid);
  const std::size_t npts = one_particle_grid.total_points();
  const bool collective = particles == 1;

  ParticleFields out;
  out.hermitian.assign(particles, PotentialField(npts, 0.0));
  out.localization.assign(particles, PotentialField(npts, 0.0));
  for (std::size_t n = 0; n < particles; ++n) {
    const double hcoef = -params.grav_strength * mu[n];
    const double lcoef = params.epsilon * params.grav_strength * mu[n];
    for (std::size_t s = 0; s < particles; ++s) {
      const bool self = s == n;
      const bool in_hermitian = collective || !self;
      const bool in_localization = collective || !self || params.localization_self_terms;
      if (in_hermitian && hcoef != 0.0)
        for (std::size_t i = 0; i < npts; ++i) out.hermitian[n][i] += hcoef * sources[s][i];
      if (in_localization && lcoef != 0.0)
        for (std::size_t i = 0; i < npts; ++i) out.localization[n][i] += lcoef * sources[s][i];
    }
  }
  return out;
}

void accumulate_broadcast(const GridSpec& config_grid, std::size_t particles,
                          std::span<const PotentialField> per_particle, std::span<double> out) {
  const std::size_t dims = config_grid.dims();
  const std::size_t d = dims / particles;
  const GridSpec one = config_grid.sub_grid(0, d);
  const auto one_strides = one.strides();
  const std::size_t total = config_grid.total_points();

  if (particles == 1) {
    for (std::size_t i = 0; i < total; ++i) out[i] += per_particle[0][i];
    return;
  }
  std::vector<std::size_t> idx(dims);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rem = i;
    for (std::size_t a = dims; a-- > 0;) {
      idx[a] = rem % config_grid.points[a];
      rem /= config_grid.points[a];
    }
    double s = 0.0;
    for (std::size_t p = 0; p < particles; ++p) {
      std::size_t j = 0;
      for (std::size_t k = 0; k < d; ++k) j += idx[p * d + k] * one_strides[k];
      s += per_particle[p][j];
    }
    out[i] += s;
  }
}

AssembledHamiltonian assemble_hamiltonian(const WaveFunction& shape, const BohmianConfiguration& q,
                                          const ModelParams& params,
                                          std::span<const double> internal_field) {
  params.validate();
  if (params.particle_count() != shape.particle_count())
    throw PreconditionError("assemble_hamiltonian: particle count mismatch");
  const auto& g = shape.grid();
  const GridSpec one = g.sub_grid(0, shape.dims_per_particle());
  const auto fields = gravity_particle_fields(q, params, one);

  AssembledHamiltonian h;
  h.hermitian.assign(internal_field.begin(), internal_field.end());
  if (h.hermitian.empty()) h.hermitian.assign(g.total_points(), 0.0);
  h.localization.assign(g.total_points(), 0.0);
  accumulate_broadcast(g, shape.particle_count(), fields.hermitian, h.hermitian);
  accumulate_broadcast(g, shape.particle_count(), fields.localization, h.localization);
  for (const auto& ax : shape.axes()) h.axis_masses.push_back(params.particle_masses[ax.particle]);
  return h;
}

}  // namespace gravcollapse
