#include "gravcollapse/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>

#include "gravcollapse/errors.hpp"

namespace gravcollapse {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ (index * 0xd1342543de82ef95ULL + 1));
}

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double standard_normal(Rng& rng) {
  // Box-Muller with the portable uniform; the distribution classes in the
  // standard library are implementation-defined.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

GridSampler::GridSampler(const WaveFunction& psi) : grid_(psi.grid()) {
  const auto rho = psi.density();
  cdf_.resize(rho.size());
  double s = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    s += rho[i];
    cdf_[i] = s;
  }
  if (!(s > 0.0)) throw PreconditionError("GridSampler: zero density");
  for (auto& c : cdf_) c /= s;
  cdf_.back() = 1.0;
}

BohmianConfiguration GridSampler::draw(Rng& rng) const {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const std::size_t cell = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), cdf_.size() - 1));
  BohmianConfiguration q;
  q.coords.resize(grid_.dims());
  coordinates_of(grid_, cell, q.coords);
  for (std::size_t a = 0; a < grid_.dims(); ++a)
    q.coords[a] = wrap_coordinate(q.coords[a] + (uniform01(rng) - 0.5) * grid_.spacing(a), grid_.box[a]);
  return q;
}

GridMarginalCdf::GridMarginalCdf(const GridSpec& grid, std::span<const double> density, std::size_t axis)
    : x0_(-0.5 * grid.box[axis]), dx_(grid.spacing(axis)) {
  const std::size_t n = grid.points[axis];
  const std::size_t stride = grid.strides()[axis];
  std::vector<double> m(n, 0.0);
  for (std::size_t i = 0; i < density.size(); ++i) m[(i / stride) % n] += density[i];
  const double total = std::accumulate(m.begin(), m.end(), 0.0);
  if (!(total > 0.0)) throw PreconditionError("GridMarginalCdf: zero density");
  cum_.assign(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) cum_[j + 1] = cum_[j] + m[j] / total;
}

double GridMarginalCdf::operator()(double x) const {
  const std::size_t n = cum_.size() - 1;
  const double t = std::clamp((x - x0_) / dx_, 0.0, static_cast<double>(n));
  // Cell j covers t in [j - 1/2, j + 1/2); cell 0 is split across both ends.
  const std::size_t j = std::min(static_cast<std::size_t>(std::floor(t + 0.5)), n);
  const double m0 = cum_[1];
  const double start = j == 0 ? 0.0 : cum_[j] - 0.5 * m0;
  const double lo = j == 0 ? 0.0 : static_cast<double>(j) - 0.5;
  const double mj = cum_[(j % n) + 1] - cum_[j % n];
  return std::clamp(start + mj * (t - lo), 0.0, 1.0);
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw PreconditionError("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_critical_value(std::size_t n, double alpha) {
  const double sn = std::sqrt(static_cast<double>(n));
  return std::sqrt(-0.5 * std::log(0.5 * alpha)) / (sn + 0.12 + 0.11 / sn);
}

double ks_p_value(std::size_t n, double d) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

Interval wilson_interval(std::size_t k, std::size_t n, double alpha) {
  if (n == 0) throw PreconditionError("wilson_interval: n must be > 0");
  const double z = normal_quantile(1.0 - 0.5 * alpha);
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw PreconditionError("quantile: empty input");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double mean(std::span<const double> v) {
  if (v.empty()) throw PreconditionError("mean: empty input");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace gravcollapse
