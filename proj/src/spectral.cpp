#include "gravcollapse/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "gravcollapse/errors.hpp"

namespace gravcollapse {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

std::vector<double> wavenumbers(const GridSpec& grid, std::size_t axis) {
  const std::size_t n = grid.points[axis];
  const double dk = 2.0 * std::numbers::pi / grid.box[axis];
  std::vector<double> k(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto m = static_cast<double>(j < n / 2 ? static_cast<long>(j)
                                                 : static_cast<long>(j) - static_cast<long>(n));
    k[j] = m * dk;
  }
  return k;
}

struct FftPlan::Impl {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

FftPlan::FftPlan(const GridSpec& grid) : impl_(std::make_unique<Impl>()), size_(grid.total_points()) {
  std::vector<int> n(grid.points.begin(), grid.points.end());
  std::lock_guard lock(planner_mutex());
  auto* scratch = fftw_alloc_complex(size_);
  impl_->fwd = fftw_plan_dft(static_cast<int>(n.size()), n.data(), scratch, scratch, FFTW_FORWARD,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
  impl_->bwd = fftw_plan_dft(static_cast<int>(n.size()), n.data(), scratch, scratch, FFTW_BACKWARD,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(scratch);
  if (!impl_->fwd || !impl_->bwd) throw std::runtime_error("FftPlan: FFTW planning failed");
}

FftPlan::~FftPlan() {
  std::lock_guard lock(planner_mutex());
  if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
  if (impl_->bwd) fftw_destroy_plan(impl_->bwd);
}

void FftPlan::forward(std::span<cplx> data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(impl_->fwd, p, p);
}

void FftPlan::backward(std::span<cplx> data) const {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(impl_->bwd, p, p);
  const double inv = 1.0 / static_cast<double>(size_);
  for (auto& z : data) z *= inv;
}

SpectralOps::SpectralOps(const GridSpec& grid, std::vector<double> axis_masses, double hbar)
    : grid_(grid), fft_(grid), hbar_(hbar) {
  if (axis_masses.size() != grid.dims())
    throw DomainError("SpectralOps: one mass per axis is required");
  for (std::size_t a = 0; a < grid.dims(); ++a) {
    auto k = wavenumbers(grid, a);
    // Drop the unpaired Nyquist mode so derivatives of real fields stay real.
    k[grid.points[a] / 2] = 0.0;
    k_.push_back(std::move(k));
  }
  // Kinetic energy keeps the Nyquist mode.
  const std::size_t n = grid.total_points();
  kinetic_.assign(n, 0.0);
  const auto strides = grid.strides();
  for (std::size_t a = 0; a < grid.dims(); ++a) {
    const auto k = wavenumbers(grid, a);
    const double scale = hbar * hbar / (2.0 * axis_masses[a]);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i / strides[a]) % grid.points[a];
      kinetic_[i] += scale * k[j] * k[j];
    }
  }
}

void SpectralOps::gradient(std::span<const cplx> field, std::size_t axis, std::span<cplx> out) const {
  std::copy(field.begin(), field.end(), out.begin());
  fft_.forward(out);
  const auto strides = grid_.strides();
  const auto& k = k_[axis];
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i / strides[axis]) % grid_.points[axis];
    out[i] *= cplx{0.0, k[j]};
  }
  fft_.backward(out);
}

void SpectralOps::gradients(std::span<const cplx> field, std::vector<std::vector<cplx>>& out) const {
  const std::size_t n = field.size();
  std::vector<cplx> spectrum(field.begin(), field.end());
  fft_.forward(spectrum);
  const auto strides = grid_.strides();
  out.resize(grid_.dims());
  for (std::size_t a = 0; a < grid_.dims(); ++a) {
    auto& g = out[a];
    g.resize(n);
    const auto& k = k_[a];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i / strides[a]) % grid_.points[a];
      g[i] = spectrum[i] * cplx{0.0, k[j]};
    }
    fft_.backward(g);
  }
}

void SpectralOps::apply_kinetic(std::span<const cplx> field, std::span<cplx> out) const {
  std::copy(field.begin(), field.end(), out.begin());
  fft_.forward(out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= kinetic_[i];
  fft_.backward(out);
}

}  // namespace gravcollapse
