#include "gravcollapse/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gravcollapse/errors.hpp"
#include "gravcollapse/grid_state.hpp"
#include "gravcollapse/spectral.hpp"

namespace gravcollapse {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_normalized(const WaveFunction& psi, const char* who) {
  if (!psi.is_normalized(1e-10))
    throw PreconditionError(std::string(who) + ": wavefunction is not normalized");
}

std::vector<double> gravity_hermitian_field(const WaveFunction& psi, const BohmianConfiguration& q,
                                            const ModelParams& params, bool localization) {
  const auto& g = psi.grid();
  const auto fields = gravity_particle_fields(q, params, g.sub_grid(0, psi.dims_per_particle()));
  std::vector<double> out(g.total_points(), 0.0);
  accumulate_broadcast(g, psi.particle_count(), localization ? fields.localization : fields.hermitian, out);
  return out;
}

}  // namespace

bool Region::contains(std::span<const double> x) const {
  for (std::size_t a = 0; a < x.size(); ++a)
    if (x[a] < lower[a] || x[a] >= upper[a]) return false;
  return true;
}

void BranchRegionSpec::validate(std::size_t dims) const {
  for (const auto& r : regions) {
    if (r.lower.size() != dims || r.upper.size() != dims)
      throw DomainError("BranchRegionSpec: region '" + r.label + "' has wrong dimension");
    if (r.label == kOtherRegion) throw DomainError("BranchRegionSpec: label 'other' is reserved");
  }
  for (std::size_t i = 0; i < regions.size(); ++i)
    for (std::size_t j = i + 1; j < regions.size(); ++j) {
      bool overlap = true;
      for (std::size_t a = 0; a < dims; ++a) {
        const double lo = std::max(regions[i].lower[a], regions[j].lower[a]);
        const double hi = std::min(regions[i].upper[a], regions[j].upper[a]);
        if (!(lo < hi)) overlap = false;
      }
      if (overlap)
        throw DomainError("BranchRegionSpec: regions '" + regions[i].label + "' and '" + regions[j].label +
                          "' overlap");
    }
}

BranchRegionSpec BranchRegionSpec::halves(const GridSpec& grid, std::size_t axis, double split) {
  const double inf = std::numeric_limits<double>::infinity();
  Region left{"Left", std::vector<double>(grid.dims(), -inf), std::vector<double>(grid.dims(), inf)};
  Region right = left;
  right.label = "Right";
  left.upper[axis] = split;
  right.lower[axis] = split;
  return {{left, right}};
}

BranchWeights branch_weights(const WaveFunction& psi, const BranchRegionSpec& spec) {
  require_normalized(psi, "branch_weights");
  const auto& g = psi.grid();
  spec.validate(g.dims());
  const auto rho = psi.density();
  const double dv = g.cell_volume();
  std::vector<double> w(spec.regions.size(), 0.0);
  double other = 0.0;
  std::vector<double> x(g.dims());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    coordinates_of(g, i, x);
    bool placed = false;
    for (std::size_t r = 0; r < spec.regions.size(); ++r)
      if (spec.regions[r].contains(x)) {
        w[r] += rho[i] * dv;
        placed = true;
        break;
      }
    if (!placed) other += rho[i] * dv;
  }
  BranchWeights out;
  for (std::size_t r = 0; r < spec.regions.size(); ++r) out.emplace_back(spec.regions[r].label, w[r]);
  out.emplace_back(kOtherRegion, other);
  return out;
}

double weight_of(const BranchWeights& w, const std::string& label) {
  for (const auto& [name, value] : w)
    if (name == label) return value;
  throw DomainError("weight_of: unknown region '" + label + "'");
}

std::vector<double> component_weights(const WaveFunction& psi) {
  std::vector<double> out;
  const double dv = psi.grid().cell_volume();
  for (std::size_t c = 0; c < psi.components(); ++c) {
    double s = 0.0;
    for (const auto& z : psi.component(c)) s += std::norm(z);
    out.push_back(s * dv);
  }
  return out;
}

EnergyExpectation energy_expectation(const WaveFunction& psi, const BohmianConfiguration& q,
                                     const ModelParams& params, std::span<const double> internal_field) {
  require_normalized(psi, "energy_expectation");
  const auto& g = psi.grid();
  const auto am = axis_masses(psi, params.particle_masses);
  SpectralOps ops(g, am, params.hbar);
  const auto& kin = ops.kinetic_spectrum();
  const std::size_t n = g.total_points();
  const double dv = g.cell_volume();

  double kinetic = 0.0;
  std::vector<cplx> spec(n);
  for (std::size_t c = 0; c < psi.components(); ++c) {
    const auto comp = psi.component(c);
    std::copy(comp.begin(), comp.end(), spec.begin());
    ops.fft().forward(spec);
    for (std::size_t i = 0; i < n; ++i) kinetic += kin[i] * std::norm(spec[i]);
  }
  kinetic *= dv / static_cast<double>(n);

  const auto rho = psi.density();
  const auto vg = gravity_hermitian_field(psi, q, params, false);
  double vint = 0.0, grav = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!internal_field.empty()) vint += rho[i] * internal_field[i];
    grav += rho[i] * vg[i];
  }
  return {kinetic + vint * dv, grav * dv};
}

double localization_derivative(const WaveFunction& psi, const BohmianConfiguration& q,
                               const ModelParams& params, const ObservableSpec& spec) {
  require_normalized(psi, "localization_derivative");
  const auto& g = psi.grid();
  const std::size_t n = g.total_points();
  const double dv = g.cell_volume();
  const auto loc = gravity_hermitian_field(psi, q, params, true);
  const auto rho = psi.density();

  double mean_l = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_l += rho[i] * loc[i];
  mean_l *= dv;

  // Position-diagonal operators reduce to a covariance against |psi|^2.
  auto diagonal_rate = [&](auto&& value_at) {
    std::vector<double> x(g.dims());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      coordinates_of(g, i, x);
      s += rho[i] * (loc[i] - mean_l) * value_at(i, std::span<const double>(x));
    }
    return 2.0 * s * dv / params.hbar;
  };

  // General operators: (2/hbar) Re <(L - <L>) psi | A psi>, per component.
  auto apply_rate = [&](auto&& apply) {
    double s = 0.0;
    std::vector<cplx> a_psi(n);
    for (std::size_t c = 0; c < psi.components(); ++c) {
      const auto comp = psi.component(c);
      apply(comp, a_psi);
      for (std::size_t i = 0; i < n; ++i) s += (std::conj(comp[i]) * (loc[i] - mean_l) * a_psi[i]).real();
    }
    return 2.0 * s * dv / params.hbar;
  };

  return std::visit(
      overloaded{
          [&](const observable::Identity&) { return diagonal_rate([](std::size_t, auto) { return 1.0; }); },
          [&](const observable::PositionField& f) {
            if (f.values.size() != n) throw PreconditionError("PositionField: size mismatch");
            return diagonal_rate([&](std::size_t i, auto) { return f.values[i]; });
          },
          [&](const observable::Projector& p) {
            return diagonal_rate([&](std::size_t, std::span<const double> x) { return p.region.contains(x) ? 1.0 : 0.0; });
          },
          [&](const observable::Energy& e) {
            const auto am = axis_masses(psi, params.particle_masses);
            SpectralOps ops(g, am, params.hbar);
            const auto vg = gravity_hermitian_field(psi, q, params, false);
            return apply_rate([&](std::span<const cplx> in, std::vector<cplx>& out) {
              ops.apply_kinetic(in, out);
              for (std::size_t i = 0; i < n; ++i) {
                const double v = (e.internal_field.empty() ? 0.0 : e.internal_field[i]) + vg[i];
                out[i] += v * in[i];
              }
            });
          },
          [&](const observable::DenseMatrix& m) {
            if (static_cast<std::size_t>(m.matrix.rows()) != n || static_cast<std::size_t>(m.matrix.cols()) != n)
              throw PreconditionError("DenseMatrix: size mismatch");
            return apply_rate([&](std::span<const cplx> in, std::vector<cplx>& out) {
              Eigen::Map<const Eigen::VectorXcd> v(in.data(), static_cast<Eigen::Index>(n));
              Eigen::Map<Eigen::VectorXcd>(out.data(), static_cast<Eigen::Index>(n)) = m.matrix * v;
            });
          },
      },
      spec);
}

namespace {

// Sigma of a Gaussian with the same FWHM as the density around its peak
// along the first axis.
double fwhm_sigma(const std::vector<double>& density, const GridSpec& one) {
  const std::size_t n0 = one.points[0];
  const std::size_t stride = one.total_points() / n0;
  const auto peak_it = std::max_element(density.begin(), density.end());
  const std::size_t peak = static_cast<std::size_t>(peak_it - density.begin());
  const double half = 0.5 * *peak_it;
  const std::size_t j0 = peak / stride;
  std::size_t width = 1;
  for (std::size_t s = 1; s < n0 / 2; ++s) {
    const std::size_t jp = (j0 + s) % n0, jm = (j0 + n0 - s) % n0;
    if (density[jp * stride + peak % stride] < half && density[jm * stride + peak % stride] < half) break;
    width = s + 1;
  }
  const double fwhm = 2.0 * static_cast<double>(width) * one.spacing(0);
  return fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
}

}  // namespace

double density_mismatch(const WaveFunction& psi, std::span<const BohmianConfiguration> snapshot,
                        std::optional<double> bandwidth) {
  if (snapshot.empty()) throw PreconditionError("density_mismatch: need at least one configuration");
  const auto dphi = quantum_density(psi);
  const GridSpec one = psi.grid().sub_grid(0, psi.dims_per_particle());
  const double h = bandwidth.value_or(0.25 * fwhm_sigma(dphi, one));
  if (!(h > 0.0)) throw DomainError("density_mismatch: bandwidth must be > 0");

  std::vector<double> empirical(one.total_points(), 0.0);
  const std::vector<double> unit(psi.particle_count(), 1.0);
  for (const auto& q : snapshot) {
    const auto md = bohmian_mass_density(q, unit, GravKernelSpec{1.0, h}, one);
    for (std::size_t i = 0; i < empirical.size(); ++i) empirical[i] += md.field[i];
  }
  const double inv = 1.0 / static_cast<double>(snapshot.size());
  double s = 0.0;
  for (std::size_t i = 0; i < empirical.size(); ++i) {
    const double d = dphi[i] - empirical[i] * inv;
    s += d * d;
  }
  return std::sqrt(s * one.cell_volume());
}

double ReducedDensityMatrix::purity() const { return (matrix * matrix).trace().real(); }

Eigen::VectorXd ReducedDensityMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(matrix, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

ReducedDensityMatrix reduced_density_matrix(const WaveFunction& psi, std::size_t subsystem_axis,
                                            std::size_t bins) {
  const auto& g = psi.grid();
  if (g.dims() != 2) throw UnsupportedError("reduced_density_matrix: requires a two-axis grid");
  if (subsystem_axis > 1) throw DomainError("reduced_density_matrix: subsystem axis must be 0 or 1");
  const std::size_t na = g.points[subsystem_axis];
  if (bins == 0 || na % bins != 0) throw DomainError("reduced_density_matrix: bins must divide the axis size");
  const std::size_t nb = g.points[1 - subsystem_axis];
  const std::size_t block = na / bins;
  const auto strides = g.strides();
  const std::size_t sa = strides[subsystem_axis], sb = strides[1 - subsystem_axis];
  const double dv = g.cell_volume();

  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(bins));
  for (std::size_t c = 0; c < psi.components(); ++c) {
    const auto comp = psi.component(c);
    for (std::size_t y = 0; y < nb; ++y)
      for (std::size_t s = 0; s < block; ++s)
        for (std::size_t i = 0; i < bins; ++i) {
          const cplx zi = comp[(i * block + s) * sa + y * sb];
          if (zi == cplx{}) continue;
          for (std::size_t j = 0; j < bins; ++j)
            rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
                zi * std::conj(comp[(j * block + s) * sa + y * sb]);
        }
  }
  rho *= dv;
  return {{subsystem_axis}, bins, rho};
}

double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  const Eigen::MatrixXcd d = a - b;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * solver.eigenvalues().cwiseAbs().sum();
}

}  // namespace gravcollapse
