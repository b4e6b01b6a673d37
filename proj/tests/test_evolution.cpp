#include <cmath>
#include <numbers>

#include "doctest.h"
#include "filmflow/geometry.hpp"
#include "filmflow/evolution.hpp"

using namespace filmflow;

namespace {

constexpr double pi = std::numbers::pi;

GridProfile wavy(const GridSpec& spec, double d, double amp) {
  return sample(spec, [&](double x, double y) { return d + amp * std::cos(2 * pi * (x + y)); });
}

}  // namespace

TEST_CASE("parameter validation") {
  EvolutionParams p;
  CHECK_NOTHROW(p.validate());
  p.T = 0.5 * p.tau;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.c0_fraction = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("a flat film without mismatch does not move") {
  const SlabMesh mesh{{1.0, 8}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{});
  EvolutionParams p;
  p.T = 5e-3;
  const EvolutionTrace tr = run(GridProfile(mesh.grid, 0.1), Anisotropy::cubic(0.1), solver, p, {});
  CHECK(tr.completed);
  CHECK(tr.records.size() == 6);
  for (const TraceRecord& r : tr.records) CHECK(r.h.values() == tr.records[0].h.values());
  CHECK(tr.dissipation == 0.0);
  CHECK(tr.last_time() == doctest::Approx(5e-3));
}

TEST_CASE("relaxation of a sinusoid: monotone energy and the dissipation bound") {
  const SlabMesh mesh{{1.0, 16}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{});
  EvolutionParams p;
  p.T = 1e-2;
  p.tau = 1e-3;
  int observed = 0;
  const EvolutionTrace tr = run(wavy(mesh.grid, 0.1, 0.01), Anisotropy::isotropic(), solver, p, {},
                                [&](const TraceRecord&, const StepRecord*) { ++observed; });
  REQUIRE(tr.completed);
  CHECK(tr.monotone);
  CHECK(observed == static_cast<int>(tr.records.size()));
  double dissipation = 0.0;
  for (std::size_t i = 1; i < tr.records.size(); ++i) {
    CHECK(tr.records[i].energy.total <= tr.records[i - 1].energy.total + 1e-10);
    CHECK(tr.records[i].converged);
    const auto& a = tr.records[i - 1].h;
    const auto& b = tr.records[i].h;
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (b[k] - a[k]) * (b[k] - a[k]);
    dissipation += s * mesh.grid.cell_area() / tr.records[i].tau;
  }
  CHECK(tr.dissipation == doctest::Approx(dissipation).epsilon(1e-12));
  CHECK(tr.dissipation_constant() == doctest::Approx(2 * std::sqrt(101.0)));
  CHECK(tr.dissipation_bound_holds());
  CHECK(tr.curvature_regularity > 0.0);
  // The amplitude decays.
  const auto& last = tr.records.back().h;
  CHECK(last.max() - last.min() < 0.02);
}

TEST_CASE("the minimum-height safeguard stops the run cleanly") {
  // A strained flat film thins at the rate W0 until it crosses C0.
  const SlabMesh mesh{{1.0, 8}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{0.15, 0.15});
  EvolutionParams p;
  p.T = 0.5;
  p.tau = 1e-2;
  p.c0_fraction = 0.95;
  const EvolutionTrace tr = run(GridProfile(mesh.grid, 0.1), Anisotropy::isotropic(), solver, p, {});
  CHECK_FALSE(tr.completed);
  CHECK(tr.safeguard_stop);
  CHECK(tr.stop_reason.find("C0") != std::string::npos);
  CHECK(tr.empirical_T0 == tr.last_time());
  CHECK(tr.empirical_T0 < p.T);
  CHECK(tr.records.size() > 2);
  for (const TraceRecord& r : tr.records) CHECK(r.min_h >= tr.c0);
}

TEST_CASE("recorded profiles respect the slope bound") {
  const SlabMesh mesh{{1.0, 16}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{});
  const GridProfile h0 = wavy(mesh.grid, 0.2, 0.03);
  EvolutionParams p;
  p.lambda0 = lipschitz_seminorm(h0) * 1.02;
  p.T = 5e-2;
  p.tau = 1e-2;
  const EvolutionTrace tr = run(h0, Anisotropy::isotropic(), solver, p, {});
  for (const TraceRecord& r : tr.records) CHECK(r.lipschitz < p.lambda0);
  CHECK_THROWS_AS(run(h0, Anisotropy::isotropic(), solver, EvolutionParams{1e-2, 1e-3, 0.1}, {}),
                  std::invalid_argument);
}

TEST_CASE("interpolants") {
  const SlabMesh mesh{{1.0, 8}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{0.02, 0.02});
  EvolutionParams p;
  p.T = 3e-3;
  p.tau = 1e-3;
  const EvolutionTrace tr = run(wavy(mesh.grid, 0.1, 0.01), Anisotropy::isotropic(), solver, p, {});
  REQUIRE(tr.records.size() == 4);
  const auto& R = tr.records;

  for (const TraceRecord& r : R) CHECK(interpolate_linear(tr, r.time).values() == r.h.values());
  const GridProfile mid = interpolate_linear(tr, 0.5 * (R[1].time + R[2].time));
  for (std::size_t k = 0; k < mid.size(); ++k) CHECK(mid[k] == doctest::Approx(0.5 * (R[1].h[k] + R[2].h[k])));

  CHECK(constant_index(tr, 0.0) == 1);
  CHECK(constant_index(tr, 0.5 * R[1].time) == 1);
  CHECK(constant_index(tr, R[1].time) == 2);
  CHECK(constant_index(tr, R[3].time) == 3);
  const auto [h, u] = interpolate_constant(tr, 0.5 * (R[1].time + R[2].time), solver);
  CHECK(h.values() == R[2].h.values());
  CHECK(u.h.values() == h.values());
  CHECK(u.energy == doctest::Approx(R[2].energy.elastic).epsilon(1e-9));

  CHECK_THROWS_AS(interpolate_linear(tr, 1.0), std::out_of_range);
  CHECK_THROWS_AS(constant_index(tr, -1e-9), std::out_of_range);
}

TEST_CASE("Holder diagnostic") {
  const SlabMesh mesh{{1.0, 8}, 4};
  const ElasticSolver solver(mesh, ElasticTensor::lame(1.0, 1.0), Mismatch{});
  EvolutionParams p;
  p.T = 5e-3;
  const EvolutionTrace tr = run(wavy(mesh.grid, 0.1, 0.01), Anisotropy::isotropic(), solver, p, {});
  const HolderReport rep = holder_time_diagnostic(tr, 3.0);
  CHECK(rep.exponent == doctest::Approx(5.0 / 72.0));
  CHECK(rep.pairs == tr.records.size() * (tr.records.size() - 1) / 2);
  CHECK(rep.constant > 0.0);
  // The constant bounds every pair.
  for (std::size_t i = 0; i < tr.records.size(); ++i)
    for (std::size_t j = i + 1; j < tr.records.size(); ++j) {
      const double dt = tr.records[j].time - tr.records[i].time;
      double diff = 0.0;
      for (std::size_t k = 0; k < tr.records[i].h.size(); ++k)
        diff = std::max(diff, std::abs(tr.records[j].h[k] - tr.records[i].h[k]));
      CHECK(diff <= rep.constant * (std::pow(dt, rep.exponent) + std::sqrt(dt)) * (1 + 1e-12));
    }
}
