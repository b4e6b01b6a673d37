#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "filmflow/energy.hpp"
#include "filmflow/geometry.hpp"
#include "support.hpp"

using namespace filmflow;
using filmflow::testing::random_field;
using filmflow::testing::random_profile;
using filmflow::testing::shifted;

namespace {

constexpr double pi = std::numbers::pi;

// Midpoint rule for a one-dimensional periodic integrand on (0, 1).
template <class F>
double integrate(F&& f, int points = 20000) {
  double s = 0.0;
  for (int i = 0; i < points; ++i) s += f((i + 0.5) / points);
  return s / points;
}

ElasticState no_elasticity(const GridProfile& h) {
  return ElasticSolver(SlabMesh{h.spec(), 4}, ElasticTensor::lame(1.0, 1.0), Mismatch{}).solve(h);
}

double objective(const GridProfile& h, const ElasticState& frozen, const GridProfile& h_prev, const Anisotropy& psi,
                 const RegularizationParams& reg) {
  const double el = frozen.mismatch.is_zero() ? 0.0 : frozen_energy(frozen, h);
  return el + surface_energy(h, psi, reg).total + penalization(h, h_prev, reg.tau);
}

}  // namespace

TEST_CASE("parameter validation") {
  RegularizationParams r;
  CHECK_NOTHROW(r.validate());
  r.p = 2.0;
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
  r = {};
  r.epsilon = 0.0;
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
  r = {};
  r.tau = -1.0;
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
}

TEST_CASE("signed power") {
  CHECK(signed_power(0.0, 3.0) == 0.0);
  CHECK(signed_power(-2.0, 3.0) == doctest::Approx(-4.0));
  CHECK(signed_power(2.0, 2.5) == doctest::Approx(std::pow(2.0, 1.5)));
}

TEST_CASE("flat film: area only") {
  const GridProfile h(GridSpec{1.7, 16}, 0.2);
  const RegularizationParams reg;
  const EnergyBreakdown e = surface_energy(h, Anisotropy::isotropic(), reg);
  CHECK(e.surface_aniso == doctest::Approx(1.7 * 1.7).epsilon(1e-14));
  CHECK(e.surface_reg == 0.0);
  // Cubic density at the pole: psi(e3) = 1 + a.
  CHECK(surface_energy(h, Anisotropy::cubic(0.2), reg).surface_aniso == doctest::Approx(1.2 * 1.7 * 1.7));
}

TEST_CASE("surface terms of a sinusoid approach their continuum integrals") {
  const double A = 0.03, eps = 2e-3, p = 3.0;
  const RegularizationParams reg{eps, p, 1e-3, 10.0};
  const double w = 2 * pi;
  const double area = integrate([&](double x) { return std::hypot(1.0, w * A * std::sin(w * x)); });
  const double reg_exact = integrate([&](double x) {
    const double d1 = -w * A * std::sin(w * x), d2 = -w * w * A * std::cos(w * x);
    const double J = std::sqrt(1 + d1 * d1);
    return eps / p * std::pow(std::abs(d2) / (J * J * J), p) * J;
  });
  auto gaps = [&](int n) {
    const GridProfile h = sample({1.0, n}, [&](double x, double) { return 0.2 + A * std::cos(w * x); });
    const EnergyBreakdown e = surface_energy(h, Anisotropy::isotropic(), reg);
    return std::pair{std::abs(e.surface_aniso - area), std::abs(e.surface_reg - reg_exact) / reg_exact};
  };
  const auto [a64, r64] = gaps(64);
  const auto [a128, r128] = gaps(128);
  CHECK(a128 < 1e-4);
  CHECK(r128 < 5e-3);
  CHECK(a64 / a128 > 3.5);
  CHECK(r64 / r128 > 3.5);
}

TEST_CASE("penalization of a uniform shift") {
  const GridProfile prev(GridSpec{1.0, 16}, 0.1);
  const GridProfile next(GridSpec{1.0, 16}, 0.13);
  CHECK(penalization(next, prev, 1e-2) == doctest::Approx(0.03 * 0.03 / (2 * 1e-2)));
  CHECK(penalization(prev, prev, 1e-2) == 0.0);
}

TEST_CASE("total energy requires the state solved on the same profile") {
  std::mt19937_64 rng(21);
  const GridProfile h = random_profile({1.0, 8}, rng, 0.1, 0.01);
  const ElasticState u = no_elasticity(h);
  CHECK_NOTHROW(total_energy(h, u, Anisotropy::isotropic(), {}));
  CHECK_THROWS_AS(total_energy(shifted(h, Field(h.size(), 1.0), 1e-3), u, Anisotropy::isotropic(), {}),
                  std::invalid_argument);
}

TEST_CASE("first variation of the area linearizes to the curvature") {
  // For small A the area gradient of A cos(2 pi x) is (2 pi)^2 A cos(2 pi x).
  const double A = 1e-4;
  const GridProfile h = sample({1.0, 64}, [&](double x, double) { return 0.1 + A * std::cos(2 * pi * x); });
  const VariationTerms t = first_variation_terms(h, no_elasticity(h), nullptr, Anisotropy::isotropic(), {});
  for (int i = 0; i < 64; i += 7) {
    const double expect = 4 * pi * pi * A * std::cos(2 * pi * h.x1(i));
    CHECK(t.anisotropy[h.index(i, 0)] == doctest::Approx(expect).epsilon(1e-2).scale(4 * pi * pi * A));
  }
  for (double v : t.velocity) CHECK(v == 0.0);
  for (double v : t.elastic) CHECK(v == 0.0);
}

TEST_CASE("velocity term") {
  std::mt19937_64 rng(22);
  const GridProfile prev = random_profile({1.0, 16}, rng, 0.1, 0.02);
  const GridProfile h = random_profile({1.0, 16}, rng, 0.1, 0.02);
  RegularizationParams reg;
  reg.tau = 0.01;
  const VariationTerms t = first_variation_terms(h, no_elasticity(h), &prev, Anisotropy::isotropic(), reg);
  const Field gx = ddx(prev.values(), prev.spec()), gy = ddy(prev.values(), prev.spec());
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double J = std::sqrt(1 + gx[k] * gx[k] + gy[k] * gy[k]);
    CHECK(t.velocity[k] == doctest::Approx((h[k] - prev[k]) / (reg.tau * J)).epsilon(1e-13));
  }
}

TEST_CASE("first variation matches central differences of the frozen objective") {
  std::mt19937_64 rng(23);
  const SlabMesh mesh{{1.0, 16}, 4};
  const RegularizationParams reg{1e-3, 3.0, 1e-3, 10.0};
  for (const Anisotropy& psi : {Anisotropy::isotropic(), Anisotropy::cubic(0.2), Anisotropy::faceted(0.5, 1.0, 0.05)}) {
    const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{0.03, 0.02});
    const GridProfile prev = random_profile(mesh.grid, rng, 0.1, 0.02);
    const GridProfile h = shifted(prev, random_field(prev.size(), rng), 1e-4);
    const ElasticState u = solver.solve(h);
    const Field g = first_variation(h, u, &prev, psi, reg);
    for (int t = 0; t < 3; ++t) {
      const Field phi = random_field(h.size(), rng);
      const double s = 1e-6;
      const double fd = (objective(shifted(h, phi, s), u, prev, psi, reg) -
                         objective(shifted(h, phi, -s), u, prev, psi, reg)) / (2 * s);
      const double an = l2_dot(g, phi, mesh.grid);
      CHECK(std::abs(fd - an) <= 1e-6 * std::abs(an) + 1e-6 * l2_norm(g, mesh.grid) * l2_norm(phi, mesh.grid));
    }
  }
}

TEST_CASE("adjoint density equals the term-by-term pairing") {
  std::mt19937_64 rng(24);
  const SlabMesh mesh{{1.0, 16}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{0.02, 0.02});
  const RegularizationParams reg{5e-3, 3.5, 1e-3, 10.0};
  const Anisotropy psi = Anisotropy::cubic(0.25);
  const GridProfile prev = random_profile(mesh.grid, rng, 0.1, 0.03);
  const GridProfile h = shifted(prev, random_field(prev.size(), rng), 1e-3);
  const ElasticState u = solver.solve(h);
  const Field g = first_variation(h, u, &prev, psi, reg);
  for (int t = 0; t < 5; ++t) {
    const Field phi = random_field(h.size(), rng);
    const double scale = l2_norm(g, mesh.grid) * l2_norm(phi, mesh.grid);
    CHECK(std::abs(l2_dot(g, phi, mesh.grid) - el_pairing(h, u, &prev, psi, reg, phi)) <= 1e-12 * scale);
  }
}

TEST_CASE("expanded-curvature pairing converges to the flux-form pairing") {
  auto gap = [](int n) {
    const GridSpec spec{1.0, n};
    const GridProfile h = sample(spec, [](double x, double y) {
      return 0.2 + 0.03 * std::cos(2 * pi * (x + y)) + 0.02 * std::sin(2 * pi * x);
    });
    const GridProfile phi = sample(spec, [](double x, double y) { return std::cos(2 * pi * (x + y)) + 0.5 * std::sin(4 * pi * x); });
    const ElasticState u = no_elasticity(h);
    const RegularizationParams reg{1e-2, 3.0, 1e-3, 10.0};
    const Anisotropy psi = Anisotropy::isotropic();
    const double a = el_pairing(h, u, nullptr, psi, reg, phi.values());
    const double b = el_pairing_expanded(h, u, nullptr, psi, reg, phi.values());
    return std::abs(a - b);
  };
  const double g32 = gap(32), g64 = gap(64);
  CHECK(g64 < g32);
  CHECK(g32 / g64 > 3.0);
}

TEST_CASE("csv output") {
  std::ostringstream os;
  write_energy_csv_header(os);
  EnergyBreakdown e;
  e.elastic = 0.5;
  e.total = 1.5;
  write_energy_csv_row(os, 3, 0.25, e);
  CHECK(os.str().rfind("step,time,elastic,surface_aniso,surface_reg,penalization,total\n3,", 0) == 0);
}
