#pragma once

// Independent reference implementations used by the tests. Everything here
// is written from first principles with dense O(N^2) algebra so that it
// shares no code with the library.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;

inline double node(std::size_t j, std::size_t n, double box) {
  return -0.5 * box + static_cast<double>(j) * box / static_cast<double>(n);
}

// Signed integer frequency of DFT index m in FFT order.
inline long freq(std::size_t m, std::size_t n) {
  const long mm = static_cast<long>(m), nn = static_cast<long>(n);
  return mm <= nn / 2 ? mm : mm - nn;
}

// Spectral derivative by an explicit DFT sum; the Nyquist mode is dropped.
inline std::vector<cplx> dft_derivative(const std::vector<cplx>& f, double box) {
  const std::size_t n = f.size();
  std::vector<cplx> hat(n), out(n);
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t j = 0; j < n; ++j)
      hat[m] += f[j] * std::polar(1.0, -2.0 * pi * static_cast<double>(m * j % n) / static_cast<double>(n));
  for (std::size_t m = 0; m < n; ++m) {
    const long k = freq(m, n);
    if (2 * std::abs(k) == static_cast<long>(n)) hat[m] = 0.0;
    else hat[m] *= cplx(0.0, 2.0 * pi * static_cast<double>(k) / box);
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t m = 0; m < n; ++m)
      out[j] += hat[m] * std::polar(1.0, 2.0 * pi * static_cast<double>(m * j % n) / static_cast<double>(n));
    out[j] /= static_cast<double>(n);
  }
  return out;
}

// Dense kinetic matrix hbar^2 k^2 / 2m in the 1D periodic grid basis,
// including the Nyquist mode.
inline Eigen::MatrixXcd kinetic_matrix(std::size_t n, double box, double mass, double hbar) {
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t m = 0; m < n; ++m) {
    const double k = 2.0 * pi * static_cast<double>(freq(m, n)) / box;
    const double e = hbar * hbar * k * k / (2.0 * mass);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        const double ph = 2.0 * pi * static_cast<double>(m) * (static_cast<double>(a) - static_cast<double>(b)) /
                          static_cast<double>(n);
        t(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += e * std::polar(1.0, ph) / static_cast<double>(n);
      }
  }
  return t;
}

inline Eigen::MatrixXcd hamiltonian_matrix(std::size_t n, double box, double mass, double hbar,
                                           const std::vector<double>& v) {
  Eigen::MatrixXcd h = kinetic_matrix(n, box, mass, hbar);
  for (std::size_t i = 0; i < n; ++i) h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += v[i];
  return h;
}

// Eigenvector `index` of a Hermitian matrix, normalized to sum |c|^2 dx = 1.
inline std::vector<cplx> eigenvector(const Eigen::MatrixXcd& h, std::size_t index, double dx, double* value = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  const auto col = es.eigenvectors().col(static_cast<Eigen::Index>(index));
  std::vector<cplx> out(static_cast<std::size_t>(col.size()));
  for (Eigen::Index i = 0; i < col.size(); ++i) out[static_cast<std::size_t>(i)] = col(i) / std::sqrt(dx);
  if (value) *value = es.eigenvalues()(static_cast<Eigen::Index>(index));
  return out;
}

inline double min_image(double d, double box) { return d - box * std::round(d / box); }

// <a|M|b> dx for grid vectors.
inline cplx braket(const std::vector<cplx>& a, const Eigen::MatrixXcd& m, const std::vector<cplx>& b, double dx) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cplx row = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) row += m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * b[j];
    s += std::conj(a[i]) * row;
  }
  return s * dx;
}

// Freely evolving 1D Gaussian on the infinite line, initially
// (2 pi s^2)^(-1/4) exp(-(x-x0)^2/(4 s^2) + i k0 (x-x0)).
inline cplx free_gaussian(double x, double t, double x0, double sigma, double k0, double mass, double hbar) {
  const cplx s = cplx(sigma * sigma, hbar * t / (2.0 * mass));
  const double v = hbar * k0 / mass;
  const double d = x - x0 - v * t;
  const cplx pref = std::pow(2.0 * pi * sigma * sigma, -0.25) * std::sqrt(sigma * sigma / s);
  return pref * std::exp(-d * d / (4.0 * s) + cplx(0.0, k0 * (x - x0) - 0.5 * hbar * k0 * k0 * t / mass));
}

// Bohmian trajectory in that packet: the offset from the packet centre
// scales with the width.
inline double free_gaussian_trajectory(double q0, double t, double x0, double sigma, double k0, double mass,
                                       double hbar) {
  const double r = hbar * t / (2.0 * mass * sigma * sigma);
  return x0 + hbar * k0 / mass * t + (q0 - x0) * std::sqrt(1.0 + r * r);
}

// Marginal of a 2D density (row-major, axis 1 fastest) onto `axis`.
inline std::vector<double> marginal(const std::vector<double>& rho2, std::size_t n0, std::size_t n1, std::size_t axis,
                                    double d_other) {
  std::vector<double> out(axis == 0 ? n0 : n1, 0.0);
  for (std::size_t i = 0; i < n0; ++i)
    for (std::size_t j = 0; j < n1; ++j) out[axis == 0 ? i : j] += rho2[i * n1 + j] * d_other;
  return out;
}

// rho_A over axis 0 of a 2D amplitude array, coarse-grained into `bins`
// contiguous blocks by tracing out the offset within each block.
inline Eigen::MatrixXcd partial_trace(const std::vector<cplx>& psi, std::size_t n0, std::size_t n1, double cell,
                                      std::size_t bins) {
  Eigen::MatrixXcd fine = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n0), static_cast<Eigen::Index>(n0));
  for (std::size_t a = 0; a < n0; ++a)
    for (std::size_t b = 0; b < n0; ++b) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < n1; ++j) s += psi[a * n1 + j] * std::conj(psi[b * n1 + j]);
      fine(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = s * cell;
    }
  const std::size_t r = n0 / bins;
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(bins));
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t j = 0; j < bins; ++j)
      for (std::size_t s = 0; s < r; ++s)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
            fine(static_cast<Eigen::Index>(i * r + s), static_cast<Eigen::Index>(j * r + s));
  return out;
}

}  // namespace oracle
