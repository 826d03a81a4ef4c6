#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "gravcollapse/errors.hpp"
#include "gravcollapse/grid_state.hpp"
#include "gravcollapse/spectral.hpp"
#include "oracles.hpp"

using namespace gravcollapse;

namespace {

const double pi = std::numbers::pi;

WaveFunction plane_wave(const GridSpec& g, int mode) {
  WaveFunction psi(g, 1);
  const double k = 2.0 * pi * mode / g.box[0];
  psi.fill([&](std::size_t, std::span<const double> x) { return std::polar(1.0, k * x[0]); });
  psi.normalize();
  return psi;
}

WaveFunction gaussian(const GridSpec& g, double x0, double sigma, double k0 = 0.0) {
  WaveFunction psi(g, 1);
  psi.fill([&](std::size_t, std::span<const double> x) {
    return oracle::free_gaussian(x[0], 0.0, x0, sigma, k0, 1.0, 1.0);
  });
  psi.normalize();
  return psi;
}

}  // namespace

TEST_CASE("grid spec validation") {
  CHECK_NOTHROW((GridSpec{{64}, {10.0}}.validate()));
  CHECK_THROWS_AS((GridSpec{{8}, {10.0}}.validate()), DomainError);
  CHECK_THROWS_AS((GridSpec{{48}, {10.0}}.validate()), DomainError);
  CHECK_THROWS_AS((GridSpec{{64}, {0.0}}.validate()), DomainError);
  CHECK_THROWS_AS((GridSpec{{16, 16, 16, 16}, {1.0, 1.0, 1.0, 1.0}}.validate()), DomainError);
  CHECK_THROWS_AS((GridSpec{{4096, 4096}, {1.0, 1.0}}.validate()), DomainError);
}

TEST_CASE("periodic wrapping and minimum image") {
  CHECK(wrap_coordinate(5.5, 10.0) == doctest::Approx(-4.5));
  CHECK(wrap_coordinate(-5.0, 10.0) == doctest::Approx(-5.0));
  CHECK(wrap_coordinate(25.0, 10.0) == doctest::Approx(-5.0));
  CHECK(periodic_delta(4.0, -4.0, 10.0) == doctest::Approx(-2.0));
  BohmianConfiguration q{{7.0, -13.0}};
  q.wrap(GridSpec{{16, 16}, {10.0, 10.0}});
  CHECK(q.coords[0] == doctest::Approx(-3.0));
  CHECK(q.coords[1] == doctest::Approx(-3.0));
}

TEST_CASE("normalization contract") {
  const GridSpec g{{128}, {20.0}};
  WaveFunction psi(g, 1);
  psi.fill([](std::size_t, std::span<const double> x) { return cplx(std::exp(-x[0] * x[0]), 0.3); });
  psi.normalize();
  CHECK(std::abs(psi.norm_squared() - 1.0) < 1e-12);
  WaveFunction zero(g, 1);
  CHECK_THROWS_AS(zero.normalize(), PreconditionError);
}

TEST_CASE("spectral derivative of a sine is exact") {
  const GridSpec g{{64}, {2.0 * pi}};
  SpectralOps ops(g, {1.0}, 1.0);
  std::vector<cplx> f(64), df(64);
  for (std::size_t j = 0; j < 64; ++j) f[j] = std::sin(3.0 * g.coordinate(0, j));
  ops.gradient(f, 0, df);
  double err = 0.0;
  for (std::size_t j = 0; j < 64; ++j) err = std::max(err, std::abs(df[j] - 3.0 * std::cos(3.0 * g.coordinate(0, j))));
  CHECK(err < 1e-10);

  // Against an explicit DFT on an arbitrary periodic sample.
  for (std::size_t j = 0; j < 64; ++j) f[j] = cplx(std::exp(std::cos(g.coordinate(0, j))), std::sin(2.0 * g.coordinate(0, j)));
  ops.gradient(f, 0, df);
  const auto ref = oracle::dft_derivative(f, g.box[0]);
  err = 0.0;
  for (std::size_t j = 0; j < 64; ++j) err = std::max(err, std::abs(df[j] - ref[j]));
  CHECK(err < 1e-10);
}

TEST_CASE("quantum density integrates to the particle count") {
  SUBCASE("single Gaussian keeps its profile") {
    const GridSpec g{{128}, {20.0}};
    const auto psi = gaussian(g, 1.0, 1.0);
    const auto d = quantum_density(psi);
    const auto rho = psi.density();
    double total = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(d[i] == doctest::Approx(rho[i]).epsilon(1e-12));
      total += d[i] * g.spacing(0);
    }
    CHECK(std::abs(total - 1.0) < 1e-10);
  }
  SUBCASE("product state on 32x32 against brute-force marginals") {
    const GridSpec g{{32, 32}, {16.0, 16.0}};
    WaveFunction psi(g, 2);
    auto f = [](double x) { return cplx(std::exp(-(x - 1.0) * (x - 1.0) / 4.0), 0.2 * x); };
    auto h = [](double x) { return std::exp(-(x + 2.0) * (x + 2.0) / 2.0) * std::polar(1.0, 0.7 * x); };
    psi.fill([&](std::size_t, std::span<const double> x) { return f(x[0]) * h(x[1]); });
    psi.normalize();
    const auto d = quantum_density(psi);
    const auto rho = psi.density();
    const double dx = g.spacing(0);
    const auto m0 = oracle::marginal(rho, 32, 32, 0, dx);
    const auto m1 = oracle::marginal(rho, 32, 32, 1, dx);
    double total = 0.0;
    for (std::size_t i = 0; i < 32; ++i) {
      CHECK(d[i] == doctest::Approx(m0[i] + m1[i]).epsilon(1e-12));
      total += d[i] * dx;
    }
    CHECK(std::abs(total - 2.0) < 1e-10);
    for (double v : d) CHECK(v >= 0.0);
  }
  SUBCASE("delta-like state sits in its cell") {
    const GridSpec g{{64}, {8.0}};
    WaveFunction psi(g, 1);
    psi.amplitudes()[17] = 1.0;
    psi.normalize();
    const auto d = quantum_density(psi);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == (i == 17 ? doctest::Approx(1.0 / g.spacing(0)) : doctest::Approx(0.0)));
  }
  SUBCASE("unnormalized input is rejected") {
    const GridSpec g{{64}, {8.0}};
    WaveFunction psi(g, 1);
    psi.amplitudes()[3] = 5.0;
    CHECK_THROWS_AS(quantum_density(psi), PreconditionError);
  }
}

TEST_CASE("probability current") {
  const GridSpec g{{128}, {20.0}};
  const std::vector<double> m{2.0};
  SUBCASE("plane wave carries hbar k / m times density") {
    const auto psi = plane_wave(g, 3);
    const double k = 2.0 * pi * 3 / 20.0;
    const auto j = probability_current(psi, m, 1.0);
    const auto d = quantum_density(psi);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(j[0][i] == doctest::Approx(k / 2.0 * d[i]).epsilon(1e-12));
  }
  SUBCASE("real Gaussian has no current") {
    const auto psi = gaussian(g, 0.5, 1.2);
    const auto j = probability_current(psi, m, 1.0);
    for (double v : j[0]) CHECK(std::abs(v) <= 1e-12);
  }
  SUBCASE("counter-propagating plane waves: zero at symmetry points") {
    WaveFunction psi(g, 1);
    const double k = 2.0 * pi * 4 / 20.0;
    psi.fill([&](std::size_t, std::span<const double> x) { return std::polar(1.0, k * x[0]) + std::polar(1.0, -k * x[0]); });
    psi.normalize();
    const auto j = probability_current(psi, m, 1.0);
    const double dx = g.spacing(0);
    const auto a = psi.amplitudes();
    for (std::size_t i = 0; i < 128; ++i) {
      // fourth-order central difference of the sampled state
      const cplx d = (-a[(i + 2) % 128] + 8.0 * a[(i + 1) % 128] - 8.0 * a[(i + 127) % 128] + a[(i + 126) % 128]) / (12.0 * dx);
      const double fd = (std::conj(a[i]) * d).imag() / 2.0;
      CHECK(std::abs(j[0][i] - fd) < 1e-12);
      CHECK(std::abs(j[0][i]) < 1e-12);
    }
    // Unequal weights: the current is uniform, (hbar k / m)(|a|^2 - |b|^2).
    psi.fill([&](std::size_t, std::span<const double> x) { return std::polar(1.0, k * x[0]) + 0.5 * std::polar(1.0, -k * x[0]); });
    psi.normalize();
    const double raw = 1.0 / (1.25 * 20.0);  // |a|^2 after normalization
    const auto j2 = probability_current(psi, m, 1.0);
    for (double v : j2[0]) CHECK(v == doctest::Approx(k / 2.0 * raw * 0.75).epsilon(1e-10));
  }
}

TEST_CASE("Bohmian velocity") {
  const GridSpec g{{256}, {32.0}};
  const std::vector<double> m{1.5};
  SUBCASE("plane wave moves at hbar k / m everywhere") {
    const auto psi = plane_wave(g, 5);
    const double k = 2.0 * pi * 5 / 32.0;
    for (double q : {-3.3, 0.0, 7.77}) {
      const auto v = bohmian_velocity(psi, {{q}}, m, 1.0, 0.01);
      CHECK(v.velocity[0] == doctest::Approx(k / 1.5).epsilon(1e-10));
      CHECK_FALSE(v.stalled);
    }
  }
  SUBCASE("real ground state is at rest") {
    const auto psi = gaussian(g, 0.0, 1.0);
    for (double q : {-1.1, 0.0, 0.37}) CHECK(std::abs(bohmian_velocity(psi, {{q}}, m, 1.0, 0.01).velocity[0]) < 1e-12);
  }
  SUBCASE("two-packet superposition against phase finite differences") {
    auto exact = [](double x) {
      return oracle::free_gaussian(x, 0.0, -1.5, 1.0, 0.8, 1.0, 1.0) +
             0.7 * oracle::free_gaussian(x, 0.0, 1.5, 1.0, -0.3, 1.0, 1.0);
    };
    WaveFunction psi(g, 1);
    psi.fill([&](std::size_t, std::span<const double> x) { return exact(x[0]); });
    psi.normalize();
    const double h = 1e-5;
    auto phase_velocity = [&](double x) { return std::arg(exact(x + h) / exact(x - h)) / (2.0 * h) / 1.5; };
    const double v = bohmian_velocity(psi, {{0.0}}, m, 1.0, 0.01).velocity[0];
    CHECK(std::abs(v - phase_velocity(0.0)) <= 1e-6 * std::abs(phase_velocity(0.0)));

    // Current/density and phase-gradient forms agree wherever the density
    // is well above the floor.
    const auto am = axis_masses(psi, m);
    SpectralOps ops(g, am, 1.0);
    GuidanceField field(psi, ops, am, 1.0);
    const double floor = GuidanceField::kRelativeDensityFloor * field.peak_density();
    std::size_t checked = 0;
    for (std::size_t i = 0; i < 256; ++i) {
      if (field.density()[i] <= 100.0 * floor) continue;
      const double x = g.coordinate(0, i);
      const double ref = phase_velocity(x);
      const double got = field.velocity(std::vector<double>{x}, 0.01).velocity[0];
      CHECK(std::abs(got - ref) <= 1e-6 * std::max(1.0, std::abs(ref)));
      ++checked;
    }
    CHECK(checked > 50);
  }
  SUBCASE("velocity below the density floor is clamped and flagged") {
    WaveFunction psi(g, 1);
    psi.fill([&](std::size_t, std::span<const double> x) {
      return oracle::free_gaussian(x[0], 0.0, 0.0, 0.5, 3.0, 1.0, 1.0);
    });
    psi.normalize();
    const double dt = 0.05;
    const auto v = bohmian_velocity(psi, {{15.0}}, m, 1.0, dt);
    CHECK(v.stalled);
    CHECK(std::abs(v.velocity[0]) <= 32.0 / (10.0 * dt));
    CHECK(std::isfinite(v.velocity[0]));
  }
}

TEST_CASE("multilinear interpolation is exact on linear fields") {
  const GridSpec g{{16, 32}, {4.0, 8.0}};
  std::vector<double> f(g.total_points());
  std::vector<double> x(2);
  for (std::size_t i = 0; i < f.size(); ++i) {
    coordinates_of(g, i, x);
    f[i] = 1.0 + 2.0 * x[0] - 0.5 * x[1];
  }
  const std::vector<double> p{0.33, -1.21};
  CHECK(interpolate(g, f, p) == doctest::Approx(1.0 + 2.0 * 0.33 + 0.5 * 1.21).epsilon(1e-12));
}

TEST_CASE("Gaussian superposition weights and edge leakage") {
  const GridSpec g{{256}, {64.0}};
  const std::vector<GaussianPacket> packets{{{-8.0}, 1.0, {}, 0.6}, {{8.0}, 1.0, {}, 0.8}};
  const auto psi = gaussian_superposition(g, 1, packets);
  CHECK(std::abs(psi.norm_squared() - 1.0) < 1e-12);
  double left = 0.0;
  const auto rho = psi.density();
  for (std::size_t i = 0; i < 256; ++i)
    if (g.coordinate(0, i) < 0.0) left += rho[i] * g.spacing(0);
  CHECK(left == doctest::Approx(0.36).epsilon(1e-9));
  CHECK(edge_weight(psi) < 1e-8);
}

TEST_CASE("checkpoint round trip") {
  const GridSpec g{{32, 16}, {8.0, 4.0}};
  WaveFunction psi(g, 2);
  psi.fill([](std::size_t, std::span<const double> x) { return cplx(std::exp(-x[0] * x[0]), std::sin(x[1])); });
  psi.normalize();
  psi.set_log_norm(-3.25);
  const auto dir = std::filesystem::temp_directory_path() / "gravcollapse_ckpt_test";
  std::filesystem::create_directories(dir);

  write_checkpoint(dir / "a.bin", psi, 1.5);
  const auto back = read_checkpoint(dir / "a.bin");
  CHECK(back.time == 1.5);
  CHECK(back.psi.log_norm() == -3.25);
  CHECK(back.psi.grid() == g);
  CHECK(back.psi.particle_count() == 2);
  for (std::size_t i = 0; i < g.total_points(); ++i) CHECK(back.psi.amplitudes()[i] == psi.amplitudes()[i]);

  write_checkpoint(dir / "b.bin", psi, 2.0, CheckpointPrecision::Complex64);
  const auto narrow = read_checkpoint(dir / "b.bin");
  for (std::size_t i = 0; i < g.total_points(); ++i)
    CHECK(std::abs(narrow.psi.amplitudes()[i] - psi.amplitudes()[i]) < 1e-6);
  CHECK(std::filesystem::file_size(dir / "b.bin") < std::filesystem::file_size(dir / "a.bin"));
  std::filesystem::remove_all(dir);
}
