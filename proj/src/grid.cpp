#include "gravcollapse/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "gravcollapse/errors.hpp"

namespace gravcollapse {

std::size_t GridSpec::total_points() const {
  std::size_t n = 1;
  for (auto p : points) n *= p;
  return n;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (std::size_t a = 0; a < dims(); ++a) v *= spacing(a);
  return v;
}

std::vector<std::size_t> GridSpec::strides() const {
  std::vector<std::size_t> s(dims(), 1);
  for (std::size_t a = dims(); a-- > 1;) s[a - 1] = s[a] * points[a];
  return s;
}

GridSpec GridSpec::sub_grid(std::size_t first, std::size_t count) const {
  GridSpec g;
  g.points.assign(points.begin() + first, points.begin() + first + count);
  g.box.assign(box.begin() + first, box.begin() + first + count);
  g.boundary = boundary;
  return g;
}

void GridSpec::validate() const {
  if (dims() < 1 || dims() > 3) throw DomainError("GridSpec: 1 to 3 axes are supported");
  if (box.size() != points.size())
    throw DomainError("GridSpec: box_lengths and points_per_axis differ in length");
  for (std::size_t a = 0; a < dims(); ++a) {
    if (points[a] < 16 || !std::has_single_bit(points[a]))
      throw DomainError("GridSpec: points_per_axis must be powers of two >= 16");
    if (!(box[a] > 0.0)) throw DomainError("GridSpec: box_lengths must be > 0");
  }
  if (total_points() > kMaxGridPoints)
    throw DomainError("GridSpec: total grid size exceeds 2^22 points");
}

double wrap_coordinate(double x, double box_length) {
  const double half = 0.5 * box_length;
  double y = std::fmod(x + half, box_length);
  if (y < 0.0) y += box_length;
  if (y >= box_length) y -= box_length;
  return y - half;
}

double periodic_delta(double a, double b, double box_length) {
  double d = std::fmod(a - b, box_length);
  if (d >= 0.5 * box_length) d -= box_length;
  if (d < -0.5 * box_length) d += box_length;
  return d;
}

void coordinates_of(const GridSpec& grid, std::size_t flat, std::span<double> out) {
  for (std::size_t a = grid.dims(); a-- > 0;) {
    const std::size_t j = flat % grid.points[a];
    flat /= grid.points[a];
    out[a] = grid.coordinate(a, j);
  }
}

WaveFunction::WaveFunction(GridSpec grid, std::size_t particles, std::size_t components)
    : grid_(std::move(grid)), particles_(particles), components_(components) {
  grid_.validate();
  if (particles_ == 0 || grid_.dims() % particles_ != 0)
    throw DomainError("WaveFunction: grid axes must split evenly among particles");
  if (components_ == 0) throw DomainError("WaveFunction: need at least one component");
  const std::size_t d = grid_.dims() / particles_;
  for (std::size_t a = 0; a < grid_.dims(); ++a) axes_.push_back({a / d, a % d});
  amps_.assign(components_ * grid_.total_points(), cplx{0.0, 0.0});
}

std::span<cplx> WaveFunction::component(std::size_t c) {
  const std::size_t n = grid_.total_points();
  return std::span<cplx>(amps_).subspan(c * n, n);
}

std::span<const cplx> WaveFunction::component(std::size_t c) const {
  const std::size_t n = grid_.total_points();
  return std::span<const cplx>(amps_).subspan(c * n, n);
}

double WaveFunction::norm_squared() const {
  double s = 0.0;
  for (const auto& z : amps_) s += std::norm(z);
  return s * grid_.cell_volume();
}

double WaveFunction::normalize() {
  const double n2 = norm_squared();
  if (!(n2 > 0.0) || !std::isfinite(n2))
    throw PreconditionError("WaveFunction::normalize: norm is zero or not finite");
  const double n = std::sqrt(n2);
  const double inv = 1.0 / n;
  for (auto& z : amps_) z *= inv;
  return n;
}

bool WaveFunction::is_normalized(double tol) const {
  return std::abs(norm_squared() - 1.0) <= tol;
}

bool WaveFunction::all_finite() const {
  return std::all_of(amps_.begin(), amps_.end(),
                     [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

std::vector<double> WaveFunction::density() const {
  const std::size_t n = grid_.total_points();
  std::vector<double> rho(n, 0.0);
  for (std::size_t c = 0; c < components_; ++c)
    for (std::size_t i = 0; i < n; ++i) rho[i] += std::norm(amps_[c * n + i]);
  return rho;
}

void BohmianConfiguration::wrap(const GridSpec& grid) {
  for (std::size_t a = 0; a < coords.size(); ++a) coords[a] = wrap_coordinate(coords[a], grid.box[a]);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'G', 'C', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <class T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw std::runtime_error("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const WaveFunction& psi, double time,
                      CheckpointPrecision precision) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path.string());
  os.write(kMagic, sizeof(kMagic));
  const auto& g = psi.grid();
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(g.dims()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(psi.particle_count()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(psi.components()));
  put<std::uint32_t>(os, precision == CheckpointPrecision::Complex64 ? 0u : 1u);
  put<std::uint32_t>(os, 0u);
  for (auto p : g.points) put<std::uint64_t>(os, p);
  for (auto b : g.box) put<double>(os, b);
  put<double>(os, time);
  put<double>(os, psi.log_norm());
  put<std::uint64_t>(os, psi.amplitudes().size());
  for (const auto& z : psi.amplitudes()) {
    if (precision == CheckpointPrecision::Complex64) {
      put<float>(os, static_cast<float>(z.real()));
      put<float>(os, static_cast<float>(z.imag()));
    } else {
      put<double>(os, z.real());
      put<double>(os, z.imag());
    }
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path.string());
  if (get<std::uint32_t>(is) != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version");
  const auto dims = get<std::uint32_t>(is);
  const auto particles = get<std::uint32_t>(is);
  const auto components = get<std::uint32_t>(is);
  const auto precision = get<std::uint32_t>(is);
  get<std::uint32_t>(is);
  if (dims < 1 || dims > 3 || precision > 1) throw std::runtime_error("checkpoint: corrupt header");
  GridSpec g;
  for (std::uint32_t a = 0; a < dims; ++a) g.points.push_back(get<std::uint64_t>(is));
  for (std::uint32_t a = 0; a < dims; ++a) g.box.push_back(get<double>(is));
  Checkpoint out;
  out.time = get<double>(is);
  const double log_norm = get<double>(is);
  out.psi = WaveFunction(g, particles, components);
  out.psi.set_log_norm(log_norm);
  const auto count = get<std::uint64_t>(is);
  if (count != out.psi.amplitudes().size()) throw std::runtime_error("checkpoint: size mismatch");
  for (auto& z : out.psi.amplitudes()) {
    if (precision == 0) {
      const float re = get<float>(is);
      const float im = get<float>(is);
      z = {re, im};
    } else {
      const double re = get<double>(is);
      const double im = get<double>(is);
      z = {re, im};
    }
  }
  return out;
}

}  // namespace gravcollapse
