#include <cmath>
#include <numbers>

#include "doctest.h"
#include "filmflow/geometry.hpp"
#include "filmflow/stepper.hpp"
#include "support.hpp"

using namespace filmflow;
using filmflow::testing::random_profile;

namespace {

constexpr double pi = std::numbers::pi;

double max_gap(const GridProfile& a, const GridProfile& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace

TEST_CASE("method names") {
  CHECK(parse_descent_method("quasi-newton") == DescentMethod::quasi_newton);
  CHECK(parse_descent_method("projected-gradient") == DescentMethod::projected_gradient);
  CHECK(to_string(DescentMethod::projected_gradient) == "projected-gradient");
  CHECK_THROWS_AS(parse_descent_method("newton"), std::invalid_argument);
}

TEST_CASE("parameter validation") {
  StepParams p;
  CHECK_NOTHROW(p.validate());
  p.armijo = 0.7;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.memory = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("a flat film without mismatch is stationary") {
  const SlabMesh mesh{{1.0, 16}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{});
  const GridProfile h(mesh.grid, 0.1);
  const StepRecord r = minimize_step(h, solver.solve(h), Anisotropy::isotropic(), solver, {});
  CHECK(r.converged);
  CHECK(r.outer_iterations == 0);
  CHECK(r.h_new.values() == h.values());
  CHECK(r.breakdown.penalization == 0.0);
}

TEST_CASE("a strained flat film thins by tau times the flat density") {
  // On flat profiles the objective reduces to l^2 (W0 c + 1 + (c - d)^2 / 2 tau),
  // minimized at c = d - tau W0.
  const SlabMesh mesh{{1.0, 8}, 4};
  const ElasticTensor C = ElasticTensor::lame(1.0, 1.0);
  const Mismatch e{0.05, 0.05};
  const ElasticSolver solver(mesh, C, e);
  const double d = 0.1;
  StepParams p;
  p.reg.tau = 1e-2;
  p.el_tol = 1e-10;
  const GridProfile h(mesh.grid, d);
  const StepRecord r = minimize_step(h, solver.solve(h), Anisotropy::isotropic(), solver, p);
  const double w0 = 2 * e.e1 * e.e1 * (1.0 + 1.0 - 1.0 / 3.0);  // mu (e1^2 + e2^2 + a3^2) + lambda tr^2 / 2
  CHECK(r.converged);
  for (std::size_t k = 0; k < r.h_new.size(); ++k) CHECK(r.h_new[k] == doctest::Approx(d - p.reg.tau * w0).epsilon(1e-9));
  CHECK(r.breakdown.objective() < r.objective_start);
}

TEST_CASE("one step lowers the objective and certifies stationarity") {
  std::mt19937_64 rng(31);
  const SlabMesh mesh{{1.0, 16}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{0.03, 0.03});
  const GridProfile h = random_profile(mesh.grid, rng, 0.1, 0.01);
  for (const Anisotropy& psi : {Anisotropy::isotropic(), Anisotropy::cubic(0.2)}) {
    const StepRecord r = minimize_step(h, solver.solve(h), psi, solver, {});
    CHECK(r.converged);
    CHECK(r.el_residual <= StepParams{}.el_tol);
    CHECK(r.breakdown.total + r.breakdown.penalization <= r.objective_start + 1e-12);
    CHECK(r.breakdown.total <= r.objective_start + 1e-12);
    // The recorded residual is the norm of the first variation at the returned pair.
    const Field g = first_variation(r.h_new, r.state, &h, psi, StepParams{}.reg);
    CHECK(l2_norm(g, mesh.grid) == doctest::Approx(r.el_residual).epsilon(1e-12));
  }
}

TEST_CASE("quasi-Newton and gradient descent reach the same minimizer") {
  std::mt19937_64 rng(32);
  const SlabMesh mesh{{1.0, 8}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{});
  const GridProfile h = random_profile(mesh.grid, rng, 0.1, 0.02);
  StepParams qn, pg;
  qn.el_tol = pg.el_tol = 1e-9;
  qn.reg.tau = pg.reg.tau = 1e-3;
  pg.method = DescentMethod::projected_gradient;
  pg.max_inner = 20000;
  const StepRecord a = minimize_step(h, solver.solve(h), Anisotropy::isotropic(), solver, qn);
  const StepRecord b = minimize_step(h, solver.solve(h), Anisotropy::isotropic(), solver, pg);
  CHECK(a.converged);
  CHECK(b.converged);
  CHECK(max_gap(a.h_new, b.h_new) < 1e-8);
  CHECK(a.inner_iterations < b.inner_iterations);
}

TEST_CASE("trial profiles beyond the slope bound are rejected") {
  // A steep sinusoid with lambda0 just above its slope: every iterate stays admissible.
  const SlabMesh mesh{{1.0, 16}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{});
  const GridProfile h = sample(mesh.grid, [](double x, double) { return 0.2 + 0.05 * std::cos(2 * pi * x); });
  StepParams p;
  p.reg.tau = 1e-1;
  p.reg.lambda0 = lipschitz_seminorm(h) * 1.0001;
  const StepRecord r = minimize_step(h, solver.solve(h), Anisotropy::isotropic(), solver, p);
  CHECK(lipschitz_seminorm(r.h_new) <= p.reg.lambda0);
  CHECK(r.breakdown.objective() <= r.objective_start);
}

TEST_CASE("input checks") {
  const SlabMesh mesh{{1.0, 8}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{0.01, 0.01});
  const GridProfile h(mesh.grid, 0.1), other(mesh.grid, 0.11);
  CHECK_THROWS_AS(minimize_step(h, solver.solve(other), Anisotropy::isotropic(), solver, {}), std::invalid_argument);
  StepParams p;
  p.reg.lambda0 = 1e-3;
  const GridProfile wavy = sample(mesh.grid, [](double x, double) { return 0.1 + 0.01 * std::sin(2 * pi * x); });
  CHECK_THROWS_AS(minimize_step(wavy, solver.solve(wavy), Anisotropy::isotropic(), solver, p), std::invalid_argument);
}
