#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace gravcollapse {

using cplx = std::complex<double>;

inline constexpr std::size_t kMaxGridPoints = std::size_t{1} << 22;

enum class Boundary { Periodic };

// Rectangular periodic configuration-space grid. Axis a spans
// [-box[a]/2, box[a]/2) with points[a] nodes; the last axis varies fastest
// in the flattened layout.
struct GridSpec {
  std::vector<std::size_t> points;
  std::vector<double> box;
  Boundary boundary = Boundary::Periodic;

  std::size_t dims() const { return points.size(); }
  std::size_t total_points() const;
  double spacing(std::size_t axis) const { return box[axis] / static_cast<double>(points[axis]); }
  double coordinate(std::size_t axis, std::size_t index) const {
    return -0.5 * box[axis] + static_cast<double>(index) * spacing(axis);
  }
  double cell_volume() const;
  std::vector<std::size_t> strides() const;
  // Axes [first, first + count) as a grid of their own.
  GridSpec sub_grid(std::size_t first, std::size_t count) const;
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

// Wraps x into [-L/2, L/2).
double wrap_coordinate(double x, double box_length);
// Minimum-image separation a - b on a periodic axis.
double periodic_delta(double a, double b, double box_length);

struct AxisAssignment {
  std::size_t particle;
  std::size_t spatial_dim;
  bool operator==(const AxisAssignment&) const = default;
};

// Complex amplitudes on the configuration-space grid. `components` > 1
// carries an internal degree of freedom (component-major storage); all
// components share the spatial grid.
class WaveFunction {
 public:
  WaveFunction() = default;
  WaveFunction(GridSpec grid, std::size_t particles, std::size_t components = 1);

  const GridSpec& grid() const { return grid_; }
  std::size_t particle_count() const { return particles_; }
  std::size_t dims_per_particle() const { return grid_.dims() / particles_; }
  std::size_t components() const { return components_; }
  const std::vector<AxisAssignment>& axes() const { return axes_; }

  std::span<cplx> amplitudes() { return amps_; }
  std::span<const cplx> amplitudes() const { return amps_; }
  std::span<cplx> component(std::size_t c);
  std::span<const cplx> component(std::size_t c) const;

  double log_norm() const { return log_norm_; }
  void set_log_norm(double v) { log_norm_ = v; }

  // Sum |psi|^2 * cell volume over all components.
  double norm_squared() const;
  // Rescales to unit norm and returns the previous norm (not squared).
  double normalize();
  bool is_normalized(double tol = 1e-10) const;
  bool all_finite() const;

  // Configuration-space probability density summed over components.
  std::vector<double> density() const;

  // Fills each component from f(component, coordinates).
  template <class F>
  void fill(F&& f);

 private:
  GridSpec grid_;
  std::size_t particles_ = 1;
  std::size_t components_ = 1;
  std::vector<AxisAssignment> axes_;
  std::vector<cplx> amps_;
  double log_norm_ = 0.0;
};

// Iterates flat index -> coordinates for a grid.
void coordinates_of(const GridSpec& grid, std::size_t flat, std::span<double> out);

template <class F>
void WaveFunction::fill(F&& f) {
  const std::size_t n = grid_.total_points();
  std::vector<double> x(grid_.dims());
  for (std::size_t c = 0; c < components_; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      coordinates_of(grid_, i, x);
      amps_[c * n + i] = f(c, std::span<const double>(x));
    }
  }
}

// The Bohmian point Q: one position per particle, stored as a flat
// configuration-space vector laid out like the grid axes.
struct BohmianConfiguration {
  std::vector<double> coords;

  std::span<const double> position(std::size_t particle, std::size_t dims_per_particle) const {
    return std::span<const double>(coords).subspan(particle * dims_per_particle, dims_per_particle);
  }
  void wrap(const GridSpec& grid);
  bool operator==(const BohmianConfiguration&) const = default;
};

enum class CheckpointPrecision { Complex64, Complex128 };

struct Checkpoint {
  WaveFunction psi;
  double time = 0.0;
};

void write_checkpoint(const std::filesystem::path& path, const WaveFunction& psi, double time,
                      CheckpointPrecision precision = CheckpointPrecision::Complex128);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace gravcollapse
