#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "gravcollapse/errors.hpp"
#include "gravcollapse/hamiltonian.hpp"
#include "gravcollapse/observables.hpp"
#include "gravcollapse/propagator.hpp"
#include "gravcollapse/stats.hpp"
#include "oracles.hpp"

using namespace gravcollapse;

namespace {

WaveFunction random_state(const GridSpec& g, std::size_t particles, std::uint64_t seed) {
  WaveFunction psi(g, particles);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  psi.fill([&](std::size_t, std::span<const double>) { return cplx(nd(rng), nd(rng)); });
  psi.normalize();
  return psi;
}

std::vector<double> harmonic_field(const GridSpec& g, double omega, double mass) {
  std::vector<double> v(g.points[0]);
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = 0.5 * mass * omega * omega * g.coordinate(0, j) * g.coordinate(0, j);
  return v;
}

WaveFunction from_vector(const GridSpec& g, const std::vector<cplx>& v) {
  WaveFunction psi(g, 1);
  std::copy(v.begin(), v.end(), psi.amplitudes().begin());
  return psi;
}

}  // namespace

TEST_CASE("branch weights") {
  const GridSpec g{{256}, {64.0}};
  const auto halves = BranchRegionSpec::halves(g);
  SUBCASE("symmetric cat splits evenly") {
    const auto psi = gaussian_superposition(g, 1, std::vector<GaussianPacket>{{{-10.0}, 1.0, {0.0}, 1.0}, {{10.0}, 1.0, {0.0}, 1.0}});
    const auto w = branch_weights(psi, halves);
    CHECK(weight_of(w, "Left") == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(weight_of(w, "Right") == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(weight_of(w, kOtherRegion) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("single packet and unequal amplitudes") {
    const auto one = gaussian_superposition(g, 1, std::vector<GaussianPacket>{{{-10.0}, 1.0, {0.0}, 1.0}});
    CHECK(weight_of(branch_weights(one, halves), "Left") == doctest::Approx(1.0).epsilon(1e-9));
    const auto cat = gaussian_superposition(g, 1, std::vector<GaussianPacket>{{{-10.0}, 1.0, {0.0}, 0.6}, {{10.0}, 1.0, {0.0}, 0.8}});
    const auto w = branch_weights(cat, halves);
    CHECK(weight_of(w, "Left") == doctest::Approx(0.36).epsilon(1e-9));
    CHECK(weight_of(w, "Right") == doctest::Approx(0.64).epsilon(1e-9));
  }
  SUBCASE("global phase does not matter") {
    auto psi = random_state(g, 1, 5);
    const auto before = branch_weights(psi, halves);
    for (auto& z : psi.amplitudes()) z *= std::polar(1.0, 1.234);
    const auto after = branch_weights(psi, halves);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i].second == doctest::Approx(before[i].second).epsilon(1e-14));
  }
  SUBCASE("uncovered points land in other") {
    BranchRegionSpec spec{{{"mid", {-4.0}, {4.0}}}};
    const auto psi = random_state(g, 1, 9);
    const auto w = branch_weights(psi, spec);
    CHECK(weight_of(w, "mid") + weight_of(w, kOtherRegion) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(weight_of(w, "mid") == doctest::Approx(32.0 / 256.0).epsilon(0.5));
  }
  SUBCASE("overlapping regions are rejected") {
    BranchRegionSpec spec{{{"a", {-4.0}, {4.0}}, {"b", {3.0}, {8.0}}}};
    CHECK_THROWS_AS(spec.validate(1), DomainError);
  }
}

TEST_CASE("energy expectation") {
  ModelParams p;
  p.epsilon = 0.0;
  p.grav_strength = 0.0;
  p.particle_masses = {1.0};
  const BohmianConfiguration q{{0.0}};

  SUBCASE("harmonic ground state") {
    const GridSpec g{{256}, {20.0}};
    const auto v = harmonic_field(g, 1.0, 1.0);
    const auto h = oracle::hamiltonian_matrix(256, 20.0, 1.0, 1.0, v);
    const auto psi = from_vector(g, oracle::eigenvector(h, 0, g.spacing(0)));
    CHECK(energy_expectation(psi, q, p, v).total() == doctest::Approx(0.5).epsilon(1e-8));
  }
  SUBCASE("plane wave kinetic energy") {
    const GridSpec g{{64}, {10.0}};
    const double k = 2.0 * oracle::pi * 4.0 / 10.0;
    WaveFunction psi(g, 1);
    psi.fill([&](std::size_t, std::span<const double> x) { return std::polar(1.0, k * x[0]); });
    psi.normalize();
    CHECK(energy_expectation(psi, q, p, {}).internal == doctest::Approx(k * k / 2.0).epsilon(1e-12));
  }
  SUBCASE("random state against the dense matrix") {
    const GridSpec g{{64}, {12.0}};
    std::vector<double> v(64);
    for (std::size_t j = 0; j < 64; ++j) v[j] = std::cos(g.coordinate(0, j)) + 0.1 * g.coordinate(0, j) * g.coordinate(0, j);
    p.particle_masses = {1.7};
    p.grav_strength = 0.8;
    p.softening = 0.5;
    const BohmianConfiguration qg{{1.3}};
    const auto psi = random_state(g, 1, 21);
    auto field = v;
    for (std::size_t j = 0; j < 64; ++j)
      field[j] += -0.8 * 1.7 * 1.7 / (std::abs(oracle::min_image(g.coordinate(0, j) - 1.3, 12.0)) + 0.5);
    const auto h = oracle::hamiltonian_matrix(64, 12.0, 1.7, 1.0, field);
    const std::vector<cplx> amps(psi.amplitudes().begin(), psi.amplitudes().end());
    const double want = oracle::braket(amps, h, amps, g.spacing(0)).real();
    const auto e = energy_expectation(psi, qg, p, v);
    CHECK(e.total() == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("localization derivative") {
  const GridSpec g{{64}, {16.0}};
  ModelParams p;
  p.epsilon = 0.05;
  p.grav_strength = 1.0;
  p.particle_masses = {2.0};
  p.softening = 0.5;
  const BohmianConfiguration q{{-2.0}};
  WaveFunction shape(g, 1);
  const auto vint = internal_potential(potential::Harmonic{0.5}, shape, p.particle_masses);
  const auto h = assemble_hamiltonian(shape, q, p, vint);
    // hermitian already carries the internal field
  const auto hmat = oracle::hamiltonian_matrix(64, 16.0, 2.0, 1.0, h.hermitian);

  SUBCASE("identity is conserved by the normalized flow") {
    CHECK(std::abs(localization_derivative(random_state(g, 1, 3), q, p, observable::Identity{})) < 1e-12);
  }
  SUBCASE("energy is stationary in an eigenstate of the Hermitian part") {
    for (std::size_t level : {0, 1, 2}) {
      const auto psi = from_vector(g, oracle::eigenvector(hmat, level, g.spacing(0)));
      CHECK(std::abs(localization_derivative(psi, q, p, observable::Energy{vint})) < 1e-10);
      CHECK(std::abs(localization_derivative(psi, q, p, observable::DenseMatrix{hmat})) < 1e-10);
    }
  }
  SUBCASE("matches the explicit formula on a random state") {
    const auto psi = random_state(g, 1, 17);
    const auto rho = psi.density();
    double lbar = 0.0;
    for (std::size_t j = 0; j < 64; ++j) lbar += rho[j] * h.localization[j] * g.spacing(0);
    std::vector<double> x(64);
    for (std::size_t j = 0; j < 64; ++j) x[j] = g.coordinate(0, j);
    double want = 0.0;
    for (std::size_t j = 0; j < 64; ++j) want += 2.0 * (h.localization[j] - lbar) * x[j] * rho[j] * g.spacing(0);
    CHECK(localization_derivative(psi, q, p, observable::PositionField{x}) == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("pulls the mean position toward the point") {
    const auto psi = gaussian_superposition(g, 1, std::vector<GaussianPacket>{{{-3.0}, 0.7, {0.0}, 1.0}, {{3.0}, 0.7, {0.0}, 1.0}});
    std::vector<double> x(64);
    for (std::size_t j = 0; j < 64; ++j) x[j] = g.coordinate(0, j);
    CHECK(localization_derivative(psi, BohmianConfiguration{{-3.0}}, p, observable::PositionField{x}) < 0.0);
    const Region left{"Left", {-8.0}, {0.0}};
    CHECK(localization_derivative(psi, BohmianConfiguration{{-3.0}}, p, observable::Projector{left}) > 0.0);
  }
}

TEST_CASE("density mismatch") {
  const GridSpec g{{128}, {32.0}};
  const auto psi = gaussian_superposition(g, 1, std::vector<GaussianPacket>{{{-2.0}, 1.5, {0.0}, 1.0}});
  GridSampler sampler(psi);
  Rng rng(4);
  std::vector<BohmianConfiguration> faithful(20000), clumped(20000, BohmianConfiguration{{9.0}});
  for (auto& c : faithful) c = sampler.draw(rng);
  const double good = density_mismatch(psi, faithful);
  const double bad = density_mismatch(psi, clumped);
  CHECK(good < 0.05);
  CHECK(bad > 0.5);
  CHECK(density_mismatch(psi, faithful) == good);
}

TEST_CASE("reduced density matrix") {
  const GridSpec g{{32, 32}, {16.0, 16.0}};
  SUBCASE("product state is pure") {
    WaveFunction psi(g, 2);
    psi.fill([](std::size_t, std::span<const double> x) {
      return std::exp(-(x[0] - 1.0) * (x[0] - 1.0) / 2.0) * std::exp(-x[1] * x[1] / 3.0 + cplx(0.0, 0.4 * x[1]));
    });
    psi.normalize();
    for (std::size_t bins : {32, 16, 8}) {
      const auto r = reduced_density_matrix(psi, 0, bins);
      CHECK(r.trace() == doctest::Approx(1.0).epsilon(1e-12));
      if (bins == 32) CHECK(r.purity() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("maximally entangled pair of packets") {
    auto bump = [](double x, double c) { return std::exp(-(x - c) * (x - c) / 1.0); };
    WaveFunction psi(g, 2);
    psi.fill([&](std::size_t, std::span<const double> x) {
      return bump(x[0], -4.0) * bump(x[1], -4.0) + bump(x[0], 4.0) * bump(x[1], 4.0);
    });
    psi.normalize();
    const auto r = reduced_density_matrix(psi, 0, 32);
    CHECK(r.purity() == doctest::Approx(0.5).epsilon(1e-9));
    // coarse-graining only ever mixes further
    CHECK(reduced_density_matrix(psi, 0, 8).purity() < r.purity());
    const auto ev = r.eigenvalues();
    std::vector<double> sorted(ev.data(), ev.data() + ev.size());
    std::sort(sorted.rbegin(), sorted.rend());
    CHECK(sorted[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(sorted[1] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::abs(sorted[2]) < 1e-12);
  }
  SUBCASE("random state against the explicit partial trace") {
    const auto psi = random_state(g, 2, 33);
    const std::vector<cplx> amps(psi.amplitudes().begin(), psi.amplitudes().end());
    for (std::size_t bins : {32, 8}) {
      const auto want = oracle::partial_trace(amps, 32, 32, g.cell_volume(), bins);
      const auto r = reduced_density_matrix(psi, 0, bins);
      CHECK((r.matrix - want).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((r.matrix - r.matrix.adjoint()).cwiseAbs().maxCoeff() < 1e-14);
      CHECK(r.trace() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(r.eigenvalues().minCoeff() > -1e-12);
    }
    // tracing the other axis agrees with the transposed layout
    std::vector<cplx> swapped(amps.size());
    for (std::size_t a = 0; a < 32; ++a)
      for (std::size_t b = 0; b < 32; ++b) swapped[b * 32 + a] = amps[a * 32 + b];
    const auto want = oracle::partial_trace(swapped, 32, 32, g.cell_volume(), 32);
    CHECK((reduced_density_matrix(psi, 1, 32).matrix - want).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("purity of a product state survives local evolution") {
    ModelParams p;
    p.epsilon = 0.0;
    p.grav_strength = 0.0;
    p.particle_masses = {1.0, 1.0};
    p.dt = 0.01;
    WaveFunction psi(g, 2);
    psi.fill([](std::size_t, std::span<const double> x) {
      return std::exp(-(x[0] - 1.0) * (x[0] - 1.0) / 2.0) * std::exp(-(x[1] + 2.0) * (x[1] + 2.0) / 3.0);
    });
    psi.normalize();
    Propagator prop(psi, p, potential::Harmonic{0.7});
    PropagatorState st{psi, {{1.0, -2.0}}};
    for (int s = 0; s < 1000; ++s) prop.step(st);
    CHECK(reduced_density_matrix(st.psi, 0, 32).purity() == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("rejects unsupported shapes") {
    const GridSpec g1{{64}, {16.0}};
    CHECK_THROWS_AS(reduced_density_matrix(random_state(g1, 1, 1), 0, 8), UnsupportedError);
    CHECK_THROWS_AS(reduced_density_matrix(random_state(g, 2, 1), 0, 5), DomainError);
  }
}

TEST_CASE("trace distance") {
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(2, 2), b = Eigen::MatrixXcd::Zero(2, 2);
  a(0, 0) = 1.0;
  b(1, 1) = 1.0;
  CHECK(trace_distance(a, b) == doctest::Approx(1.0));
  CHECK(trace_distance(a, a) == doctest::Approx(0.0));
  b = 0.5 * Eigen::MatrixXcd::Identity(2, 2);
  CHECK(trace_distance(a, b) == doctest::Approx(0.5));
}
