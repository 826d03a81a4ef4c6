#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "gravcollapse/errors.hpp"
#include "gravcollapse/hamiltonian.hpp"
#include "oracles.hpp"

using namespace gravcollapse;

namespace {

double direct_potential(double x, const std::vector<double>& qs, const std::vector<double>& mu, double target,
                        double gamma, double a, double box) {
  double v = 0.0;
  for (std::size_t s = 0; s < qs.size(); ++s) v -= gamma * target * mu[s] / (std::abs(oracle::min_image(x - qs[s], box)) + a);
  return v;
}

}  // namespace

TEST_CASE("single point source") {
  const GridSpec g{{128}, {16.0}};
  const double gamma = 2.5, m = 3.0, a = 0.5;
  const BohmianConfiguration q{{g.coordinate(0, 40)}};
  const auto v = grav_potential_per_particle(q, std::vector<double>{m}, m, gamma, {a, 0.0}, g);
  CHECK(v[40] == doctest::Approx(-gamma * m * m / a).epsilon(1e-14));
  const auto lowest = std::min_element(v.begin(), v.end()) - v.begin();
  CHECK(lowest == 40);
  for (double x : v) CHECK(std::isfinite(x));
}

TEST_CASE("two symmetric sources give an even potential") {
  const GridSpec g{{128}, {16.0}};
  const BohmianConfiguration q{{-3.0, 3.0}};
  const auto v = grav_potential_per_particle(q, std::vector<double>{1.0, 1.0}, 1.0, 1.0, {0.25, 0.0}, g.sub_grid(0, 1));
  // node j sits at -L/2 + j dx; its mirror is node (N - j) mod N
  for (std::size_t j = 1; j < 128; ++j) CHECK(v[j] == doctest::Approx(v[128 - j]).epsilon(1e-13));
}

TEST_CASE("potential matches a direct sum on random configurations") {
  const GridSpec g{{64}, {10.0}};
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(-5.0, 5.0), mass(0.1, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> qs{pos(rng), pos(rng), pos(rng)}, mu{mass(rng), mass(rng), mass(rng)};
    const auto v = grav_potential_per_particle({qs}, mu, 1.7, 0.9, {0.3, 0.0}, g);
    for (std::size_t j = 0; j < 64; ++j)
      CHECK(v[j] == doctest::Approx(direct_potential(g.coordinate(0, j), qs, mu, 1.7, 0.9, 0.3, 10.0)).epsilon(1e-12));
  }
}

TEST_CASE("potential is translation covariant") {
  const GridSpec g{{128}, {16.0}};
  const std::vector<double> mu{1.0, 2.0};
  const auto v0 = grav_potential_per_particle({{-2.0, 5.0}}, mu, 1.0, 1.0, {0.4, 0.0}, g);
  const double shift = 7.0 * g.spacing(0);
  const auto v1 = grav_potential_per_particle({{-2.0 + shift, wrap_coordinate(5.0 + shift, 16.0)}}, mu, 1.0, 1.0, {0.4, 0.0}, g);
  for (std::size_t j = 0; j < 128; ++j) CHECK(v1[(j + 7) % 128] == doctest::Approx(v0[j]).epsilon(1e-12));
}

TEST_CASE("smeared Bohmian mass density") {
  const GridSpec g{{256}, {32.0}};
  SUBCASE("single source integrates to its mass") {
    const auto rho = bohmian_mass_density({{1.3}}, std::vector<double>{2.5}, {0.5, 0.8}, g);
    CHECK_FALSE(rho.point_sources);
    double total = 0.0;
    for (double x : rho.field) total += x * g.spacing(0);
    CHECK(total == doctest::Approx(2.5).epsilon(1e-8));
  }
  SUBCASE("coincident sources double the amplitude") {
    const auto one = bohmian_mass_density({{0.5}}, std::vector<double>{1.0}, {0.5, 0.8}, g);
    const auto two = bohmian_mass_density({{0.5, 0.5}}, std::vector<double>{1.0, 1.0}, {0.5, 0.8}, g);
    for (std::size_t i = 0; i < 256; ++i) CHECK(two.field[i] == doctest::Approx(2.0 * one.field[i]).epsilon(1e-12));
  }
  SUBCASE("point sources stay implicit") {
    CHECK(bohmian_mass_density({{0.0}}, std::vector<double>{1.0}, {0.5, 0.0}, g).point_sources);
  }
  auto worst_relative = [&](double a, double smear) {
    const BohmianConfiguration q{{0.0}};
    const auto point = grav_potential_per_particle(q, std::vector<double>{1.0}, 1.0, 1.0, {a, 0.0}, g);
    const auto smeared = grav_potential_per_particle(q, std::vector<double>{1.0}, 1.0, 1.0, {a, smear}, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < 256; ++i) worst = std::max(worst, std::abs(point[i] - smeared[i]) / std::abs(point[i]));
    return worst;
  };
  SUBCASE("smearing below a tenth of the default softening matches the closed form") {
    const double a = 2.0 * g.spacing(0);
    CHECK(worst_relative(a, a / 10.0) < 1e-4);
  }
  SUBCASE("wider kernels converge monotonically as the smearing shrinks") {
    double prev = 1.0;
    for (double smear : {0.4, 0.2, 0.1, 0.05, 0.02}) {
      const double w = worst_relative(2.0, smear);
      CHECK(w < prev);
      prev = w;
    }
    CHECK(prev < 1e-12);
  }
}

TEST_CASE("Hamiltonian assembly") {
  const GridSpec g{{128}, {16.0}};
  WaveFunction shape(g, 1);
  ModelParams p;
  p.particle_masses = {2.0};
  p.grav_strength = 1.5;
  p.softening = 0.5;
  const BohmianConfiguration q{{1.0}};
  const std::vector<double> zero(128, 0.0);

  SUBCASE("no localization without epsilon") {
    p.epsilon = 0.0;
    const auto h = assemble_hamiltonian(shape, q, p, zero);
    for (double l : h.localization) CHECK(l == 0.0);
  }
  SUBCASE("collective mode: full self-source, L = eps gamma M^2 K") {
    p.epsilon = 0.03;
    const auto h = assemble_hamiltonian(shape, q, p, zero);
    for (std::size_t j = 0; j < 128; ++j) {
      const double k = 1.0 / (std::abs(oracle::min_image(g.coordinate(0, j) - 1.0, 16.0)) + 0.5);
      CHECK(h.localization[j] == doctest::Approx(0.03 * 1.5 * 4.0 * k).epsilon(1e-13));
      CHECK(h.localization[j] >= 0.0);
    }
  }
  SUBCASE("H0 + iL reassembles g V_G with g = 1 - i eps") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-8.0, 8.0);
    for (int trial = 0; trial < 10; ++trial) {
      p.epsilon = 0.01 * (trial + 1);
      const BohmianConfiguration qr{{u(rng)}};
      const auto h = assemble_hamiltonian(shape, qr, p, zero);
      for (std::size_t j = 0; j < 128; ++j) {
        const double vg = direct_potential(g.coordinate(0, j), qr.coords, {2.0}, 2.0, 1.5, 0.5, 16.0);
        const cplx want = cplx(1.0, -p.epsilon) * vg;
        const cplx got = cplx(h.hermitian[j], h.localization[j]);
        CHECK(std::abs(got - want) < 1e-12 * std::abs(want));
      }
    }
  }
}

TEST_CASE("multi-particle self-terms") {
  const GridSpec g{{32, 32}, {16.0, 16.0}};
  WaveFunction shape(g, 2);
  ModelParams p;
  p.particle_masses = {1.0, 1.0};
  p.grav_masses = {2.0, 3.0};
  p.grav_strength = 1.0;
  p.epsilon = 0.1;
  p.softening = 0.5;
  const BohmianConfiguration q{{-2.0, 4.0}};
  const std::vector<double> zero(g.total_points(), 0.0);
  std::vector<double> x(2);

  auto check = [&](bool self_loc) {
    p.localization_self_terms = self_loc;
    const auto h = assemble_hamiltonian(shape, q, p, zero);
    for (std::size_t i = 0; i < g.total_points(); ++i) {
      coordinates_of(g, i, x);
      auto k = [&](double r, double s) { return 1.0 / (std::abs(oracle::min_image(r - s, 16.0)) + 0.5); };
      // particle 0 feels source 1 only, and vice versa
      const double herm = -2.0 * 3.0 * k(x[0], 4.0) - 3.0 * 2.0 * k(x[1], -2.0);
      CHECK(h.hermitian[i] == doctest::Approx(herm).epsilon(1e-12));
      double loc = 0.1 * (2.0 * 3.0 * k(x[0], 4.0) + 3.0 * 2.0 * k(x[1], -2.0));
      if (self_loc) loc += 0.1 * (2.0 * 2.0 * k(x[0], -2.0) + 3.0 * 3.0 * k(x[1], 4.0));
      CHECK(h.localization[i] == doctest::Approx(loc).epsilon(1e-12));
    }
  };
  check(true);
  check(false);
}

TEST_CASE("internal potentials") {
  const GridSpec g{{64}, {10.0}};
  WaveFunction shape(g, 1);
  const auto v = internal_potential(potential::Harmonic{2.0}, shape, std::vector<double>{3.0});
  for (std::size_t j = 0; j < 64; ++j) CHECK(v[j] == doctest::Approx(0.5 * 3.0 * 4.0 * g.coordinate(0, j) * g.coordinate(0, j)));
  CHECK_THROWS_AS(validate(InternalPotentialSpec{potential::Harmonic{0.0}}), DomainError);
  CHECK_THROWS_AS(validate(InternalPotentialSpec{potential::SoftCoulomb{1.0, 0.0}}), DomainError);

  const GridSpec g2{{32, 32}, {16.0, 16.0}};
  WaveFunction pair(g2, 2);
  const auto c = internal_potential(potential::PairwiseSoftCoulomb{2.0, 1.0}, pair, std::vector<double>{1.0, 1.0});
  std::vector<double> x(2);
  for (std::size_t i = 0; i < g2.total_points(); i += 37) {
    coordinates_of(g2, i, x);
    const double r = oracle::min_image(x[0] - x[1], 16.0);
    CHECK(c[i] == doctest::Approx(-2.0 / std::sqrt(r * r + 1.0)).epsilon(1e-13));
  }
}
