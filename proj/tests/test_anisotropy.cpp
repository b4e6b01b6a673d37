#include <cmath>

#include "doctest.h"
#include "filmflow/anisotropy.hpp"

using namespace filmflow;

namespace {

std::vector<Anisotropy> families() {
  return {Anisotropy::isotropic(), Anisotropy::cubic(0.2), Anisotropy::cubic(-0.1),
          Anisotropy::faceted(0.5, 1.0, 0.05, 0.25)};
}

double min_convexity(const Anisotropy& psi, int samples) {
  double m = 1e300;
  for (const Vec3& xi : sphere_samples(samples)) m = std::min(m, tangential_convexity(psi, xi));
  return m;
}

}  // namespace

TEST_CASE("isotropic density is the Euclidean norm") {
  const Anisotropy psi = Anisotropy::isotropic();
  const Vec3 xi(0.3, -1.2, 2.0);
  CHECK(psi.value(xi) == doctest::Approx(xi.norm()));
  CHECK((psi.gradient(xi) - xi / xi.norm()).norm() < 1e-15);
  // Unit tangential curvature on the unit sphere.
  CHECK(tangential_convexity(psi, xi.normalized()) == doctest::Approx(1.0));
  CHECK_THROWS_AS(psi.value(Vec3::Zero()), std::invalid_argument);
}

TEST_CASE("one-homogeneity, Euler relation and radial null direction") {
  for (const Anisotropy& psi : families())
    for (const Vec3& xi : sphere_samples(300)) {
      const double v = psi.value(xi);
      CHECK(psi.value(3.7 * xi) == doctest::Approx(3.7 * v).epsilon(1e-13));
      CHECK(psi.gradient(xi).dot(xi) == doctest::Approx(v).epsilon(1e-12));
      CHECK((psi.hessian(xi) * xi).norm() <= 1e-10 * v);
      const double c = psi.bound_constant();
      CHECK(v >= 1.0 / c - 1e-12);
      CHECK(v <= c + 1e-12);
    }
}

TEST_CASE("gradient and hessian match central differences") {
  const double s = 1e-5;
  for (const Anisotropy& psi : families())
    for (const Vec3& xi : sphere_samples(100)) {
      const Vec3 g = psi.gradient(xi);
      const Mat3 H = psi.hessian(xi);
      for (int c = 0; c < 3; ++c) {
        Vec3 a = xi, b = xi;
        a[c] += s;
        b[c] -= s;
        CHECK(std::abs((psi.value(a) - psi.value(b)) / (2 * s) - g[c]) < 1e-8);
        CHECK(((psi.gradient(a) - psi.gradient(b)) / (2 * s) - H.col(c)).norm() < 1e-6 * std::max(1.0, H.norm()));
      }
      CHECK((H - H.transpose()).norm() < 1e-12 * std::max(1.0, H.norm()));
    }
}

TEST_CASE("cubic density loses convexity at a = 1/3") {
  // On the coordinate planes psi + psi'' = 1 + 3a/4 - (15a/4) cos(4 theta).
  CHECK(min_convexity(Anisotropy::cubic(0.30), 4000) > 0.0);
  CHECK(min_convexity(Anisotropy::cubic(0.36), 4000) < 0.0);
  const double a = 0.2;
  CHECK(tangential_convexity(Anisotropy::cubic(a), Vec3(1, 0, 0)) == doctest::Approx(1 - 3 * a));
}

TEST_CASE("faceted density is non-convex near the equator") {
  const Anisotropy psi = Anisotropy::faceted(0.5, 1.0);
  CHECK(psi.facet_height() == 1.0);
  CHECK(psi.value(Vec3(0, 0, 1)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(min_convexity(psi, 2000) < 0.0);
}

TEST_CASE("Wulff facet test separates faceted from smooth densities") {
  const WulffReport iso = wulff_facet_test(Anisotropy::isotropic(), 4000);
  CHECK_FALSE(iso.facet_found);
  CHECK(iso.facet_height == doctest::Approx(1.0));

  const double beta = 0.5;
  const WulffReport fac = wulff_facet_test(Anisotropy::faceted(beta, 1.0), 4000);
  CHECK(fac.facet_found);
  CHECK(fac.facet_radius > 0.9 * beta);
  CHECK(fac.facet_radius <= beta * (1 + 1e-9));
  CHECK(fac.facet_height == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fac.min_tangential_hessian < 0.0);

  CHECK_THROWS_AS(wulff_facet_test(Anisotropy::isotropic(), 100), std::invalid_argument);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(Anisotropy::faceted(-0.1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(Anisotropy::faceted(0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Anisotropy::cubic(-1.5), std::invalid_argument);
}
