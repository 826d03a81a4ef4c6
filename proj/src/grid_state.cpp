#include "gravcollapse/grid_state.hpp"

#include <algorithm>
#include <cmath>

#include "gravcollapse/errors.hpp"

namespace gravcollapse {

namespace {

void require_shared_particle_grid(const WaveFunction& psi) {
  const auto& g = psi.grid();
  const std::size_t d = psi.dims_per_particle();
  for (std::size_t n = 1; n < psi.particle_count(); ++n)
    for (std::size_t k = 0; k < d; ++k)
      if (g.points[n * d + k] != g.points[k] || g.box[n * d + k] != g.box[k])
        throw PreconditionError("particles must share identical per-dimension grids");
}

void require_normalized(const WaveFunction& psi, const char* who) {
  if (!psi.is_normalized(1e-10))
    throw PreconditionError(std::string(who) + ": wavefunction is not normalized");
}

// Adds value * weight at each configuration point into the one-particle
// grid slot of every particle.
template <class Value>
void marginalize(const WaveFunction& psi, Value&& value, std::vector<double>& out) {
  const auto& g = psi.grid();
  const std::size_t d = psi.dims_per_particle();
  const GridSpec one = g.sub_grid(0, d);
  const auto one_strides = one.strides();
  const double weight = g.cell_volume() / one.cell_volume();
  out.assign(one.total_points(), 0.0);
  std::vector<std::size_t> idx(g.dims());
  const std::size_t total = g.total_points();
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t rem = i;
    for (std::size_t a = g.dims(); a-- > 0;) {
      idx[a] = rem % g.points[a];
      rem /= g.points[a];
    }
    for (std::size_t n = 0; n < psi.particle_count(); ++n) {
      std::size_t j = 0;
      for (std::size_t k = 0; k < d; ++k) j += idx[n * d + k] * one_strides[k];
      out[j] += weight * value(i, n);
    }
  }
}

}  // namespace

std::vector<double> quantum_density(const WaveFunction& psi) {
  require_normalized(psi, "quantum_density");
  require_shared_particle_grid(psi);
  const auto rho = psi.density();
  std::vector<double> out;
  marginalize(psi, [&](std::size_t i, std::size_t) { return rho[i]; }, out);
  return out;
}

std::vector<double> axis_masses(const WaveFunction& psi, std::span<const double> masses) {
  if (masses.size() != psi.particle_count())
    throw PreconditionError("one mass per particle is required");
  std::vector<double> m;
  for (const auto& ax : psi.axes()) m.push_back(masses[ax.particle]);
  return m;
}

std::vector<std::vector<double>> probability_current(const WaveFunction& psi,
                                                     std::span<const double> masses, double hbar) {
  require_normalized(psi, "probability_current");
  require_shared_particle_grid(psi);
  const auto am = axis_masses(psi, masses);
  SpectralOps ops(psi.grid(), am, hbar);
  GuidanceField field(psi, ops, am, hbar);
  const std::size_t d = psi.dims_per_particle();
  std::vector<std::vector<double>> out(d);
  for (std::size_t k = 0; k < d; ++k)
    marginalize(psi, [&](std::size_t i, std::size_t n) { return field.current(n * d + k)[i]; }, out[k]);
  return out;
}

double interpolate(const GridSpec& grid, std::span<const double> field, std::span<const double> point) {
  const std::size_t dims = grid.dims();
  const auto strides = grid.strides();
  std::size_t lo[3], hi[3];
  double w[3];
  for (std::size_t a = 0; a < dims; ++a) {
    const double u = (wrap_coordinate(point[a], grid.box[a]) + 0.5 * grid.box[a]) / grid.spacing(a);
    const double fl = std::floor(u);
    const auto n = grid.points[a];
    lo[a] = static_cast<std::size_t>(fl) % n;
    hi[a] = (lo[a] + 1) % n;
    w[a] = u - fl;
  }
  double sum = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << dims); ++corner) {
    double weight = 1.0;
    std::size_t flat = 0;
    for (std::size_t a = 0; a < dims; ++a) {
      const bool upper = (corner >> a) & 1u;
      weight *= upper ? w[a] : 1.0 - w[a];
      flat += (upper ? hi[a] : lo[a]) * strides[a];
    }
    if (weight != 0.0) sum += weight * field[flat];
  }
  return sum;
}

GuidanceField::GuidanceField(const WaveFunction& psi, const SpectralOps& ops,
                             std::span<const double> axis_masses, double hbar)
    : grid_(psi.grid()) {
  const std::size_t n = grid_.total_points();
  const std::size_t dims = grid_.dims();
  density_.assign(n, 0.0);
  current_.assign(dims, std::vector<double>(n, 0.0));
  std::vector<std::vector<cplx>> grads;
  for (std::size_t c = 0; c < psi.components(); ++c) {
    const auto comp = psi.component(c);
    ops.gradients(comp, grads);
    for (std::size_t i = 0; i < n; ++i) density_[i] += std::norm(comp[i]);
    for (std::size_t a = 0; a < dims; ++a) {
      const double scale = hbar / axis_masses[a];
      for (std::size_t i = 0; i < n; ++i)
        current_[a][i] += scale * (std::conj(comp[i]) * grads[a][i]).imag();
    }
  }
  peak_ = *std::max_element(density_.begin(), density_.end());
}

VelocitySample GuidanceField::velocity(std::span<const double> q, double dt) const {
  VelocitySample out;
  out.velocity.resize(grid_.dims());
  const double rho = interpolate(grid_, density_, q);
  const bool low = !(rho > kRelativeDensityFloor * peak_);
  out.stalled = low;
  for (std::size_t a = 0; a < grid_.dims(); ++a) {
    double v = rho > 0.0 ? interpolate(grid_, current_[a], q) / rho : 0.0;
    if (low) {
      const double vmax = grid_.box[a] / (10.0 * dt);
      if (!std::isfinite(v)) v = 0.0;
      v = std::clamp(v, -vmax, vmax);
    }
    out.velocity[a] = v;
  }
  return out;
}

VelocitySample bohmian_velocity(const WaveFunction& psi, const BohmianConfiguration& q,
                                std::span<const double> masses, double hbar, double dt) {
  if (q.coords.size() != psi.grid().dims())
    throw PreconditionError("bohmian_velocity: configuration has wrong dimension");
  const auto am = axis_masses(psi, masses);
  SpectralOps ops(psi.grid(), am, hbar);
  GuidanceField field(psi, ops, am, hbar);
  return field.velocity(q.coords, dt);
}

double edge_weight(const WaveFunction& psi, double fraction) {
  const auto& g = psi.grid();
  const auto rho = psi.density();
  std::vector<std::size_t> band(g.dims());
  for (std::size_t a = 0; a < g.dims(); ++a)
    band[a] = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(g.points[a])));
  double edge = 0.0, total = 0.0;
  std::vector<std::size_t> idx(g.dims());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    std::size_t rem = i;
    bool at_edge = false;
    for (std::size_t a = g.dims(); a-- > 0;) {
      const std::size_t j = rem % g.points[a];
      rem /= g.points[a];
      if (j < band[a] || j >= g.points[a] - band[a]) at_edge = true;
    }
    total += rho[i];
    if (at_edge) edge += rho[i];
  }
  return total > 0.0 ? edge / total : 0.0;
}

}  // namespace gravcollapse

namespace gravcollapse {

WaveFunction gaussian_superposition(const GridSpec& grid, std::size_t particles,
                                    std::span<const GaussianPacket> packets) {
  if (packets.empty()) throw PreconditionError("gaussian_superposition: no packets");
  WaveFunction out(grid, particles, 1);
  auto amps = out.amplitudes();
  std::vector<cplx> g(grid.total_points());
  std::vector<double> x(grid.dims());
  for (const auto& p : packets) {
    if (p.center.size() != grid.dims() || !(p.width > 0.0) ||
        (!p.momentum.empty() && p.momentum.size() != grid.dims()))
      throw DomainError("gaussian_superposition: malformed packet");
    double n2 = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      coordinates_of(grid, i, x);
      double e = 0.0, phase = 0.0;
      for (std::size_t a = 0; a < x.size(); ++a) {
        const double d = periodic_delta(x[a], p.center[a], grid.box[a]);
        e += d * d;
        if (!p.momentum.empty()) phase += p.momentum[a] * d;
      }
      g[i] = std::polar(std::exp(-e / (4.0 * p.width * p.width)), phase);
      n2 += std::norm(g[i]);
    }
    const cplx scale = p.amplitude / std::sqrt(n2 * grid.cell_volume());
    for (std::size_t i = 0; i < g.size(); ++i) amps[i] += scale * g[i];
  }
  out.normalize();
  return out;
}

}  // namespace gravcollapse
