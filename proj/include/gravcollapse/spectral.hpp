#pragma once

#include <memory>
#include <span>
#include <vector>

#include "gravcollapse/grid.hpp"

namespace gravcollapse {

// Angular wavenumbers 2*pi*m/L in FFT order for one axis.
std::vector<double> wavenumbers(const GridSpec& grid, std::size_t axis);

// Multi-dimensional complex FFT over a GridSpec. Plans are created with
// FFTW_ESTIMATE so transforms are bitwise reproducible; execution on
// caller-provided arrays is thread-safe.
class FftPlan {
 public:
  explicit FftPlan(const GridSpec& grid);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  void forward(std::span<cplx> data) const;
  // Includes the 1/N normalization.
  void backward(std::span<cplx> data) const;
  std::size_t size() const { return size_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t size_;
};

// Spectral derivatives and the kinetic operator on a fixed grid.
class SpectralOps {
 public:
  SpectralOps(const GridSpec& grid, std::vector<double> axis_masses, double hbar);

  const GridSpec& grid() const { return grid_; }
  const FftPlan& fft() const { return fft_; }

  // d/dx_axis of a field; the Nyquist mode is dropped.
  void gradient(std::span<const cplx> field, std::size_t axis, std::span<cplx> out) const;
  // All axis derivatives from a single forward transform.
  void gradients(std::span<const cplx> field, std::vector<std::vector<cplx>>& out) const;
  // Kinetic energy sum_a hbar^2 k_a^2 / (2 m_a) per Fourier mode.
  const std::vector<double>& kinetic_spectrum() const { return kinetic_; }
  // out = T field.
  void apply_kinetic(std::span<const cplx> field, std::span<cplx> out) const;

 private:
  GridSpec grid_;
  FftPlan fft_;
  std::vector<std::vector<double>> k_;
  std::vector<double> kinetic_;
  double hbar_;
};

}  // namespace gravcollapse
