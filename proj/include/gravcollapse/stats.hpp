#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "gravcollapse/grid.hpp"

namespace gravcollapse {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);
// Independent seed for run `index` of an ensemble with base seed `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);
// Uniform in [0, 1) from the top 53 bits; identical on every platform.
double uniform01(Rng& rng);
double standard_normal(Rng& rng);

// Draws configuration-space points from |psi|^2: inverse CDF over grid
// cells, then uniform jitter inside the cell centred on the node.
class GridSampler {
 public:
  explicit GridSampler(const WaveFunction& psi);
  BohmianConfiguration draw(Rng& rng) const;

 private:
  GridSpec grid_;
  std::vector<double> cdf_;
};

// Cumulative distribution along `axis` of a density on `grid`, treating the
// density as constant over each cell centred on its node. Returns F(x) for
// x in the box [-L/2, L/2) (shifted by half a cell, with periodic wrap).
class GridMarginalCdf {
 public:
  GridMarginalCdf(const GridSpec& grid, std::span<const double> density, std::size_t axis);
  double operator()(double x) const;

 private:
  double x0_;
  double dx_;
  std::vector<double> cum_;  // cum_[j] = mass of cells 0..j-1
};

// Kolmogorov-Smirnov distance between the empirical CDF of samples and cdf.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
// Asymptotic one-sample critical value at significance alpha.
double ks_critical_value(std::size_t n, double alpha);
// Asymptotic p-value of the statistic d for sample size n.
double ks_p_value(std::size_t n, double d);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double x) const { return lower <= x && x <= upper; }
};

// Wilson score interval for k successes in n trials at two-sided level
// 1 - alpha.
Interval wilson_interval(std::size_t k, std::size_t n, double alpha);
double normal_quantile(double p);

double median(std::vector<double> v);
double quantile(std::vector<double> v, double p);
double mean(std::span<const double> v);
double std_error(std::span<const double> v);

}  // namespace gravcollapse
