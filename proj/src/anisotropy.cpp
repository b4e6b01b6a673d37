#include "filmflow/anisotropy.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace filmflow {

namespace {

void require_nonzero(const Vec3& xi) {
  if (!(xi.squaredNorm() > 0.0) || !xi.allFinite())
    throw std::invalid_argument("anisotropy: argument must be a finite nonzero vector");
}

// Pieces of the densities as (value, gradient, hessian) triples.
struct Piece {
  double v;
  Vec3 g;
  Mat3 H;
};

Piece euclidean(const Vec3& xi) {
  const double r = xi.norm();
  const Vec3 nrm = xi / r;
  return {r, nrm, (Mat3::Identity() - nrm * nrm.transpose()) / r};
}

// sqrt(xi^T A xi) for a diagonal positive A.
Piece quadratic_norm(const Vec3& xi, const Vec3& diag) {
  const Vec3 Ax = diag.cwiseProduct(xi);
  const double q = std::sqrt(xi.dot(Ax));
  Mat3 H = Mat3(diag.asDiagonal()) - Ax * Ax.transpose() / (q * q);
  return {q, Ax / q, H / q};
}

// sum xi_i^4 / |xi|^3
Piece quartic(const Vec3& xi) {
  const double r2 = xi.squaredNorm(), r = std::sqrt(r2);
  const double r3 = r2 * r, r5 = r3 * r2, r7 = r5 * r2;
  const double S = xi.array().pow(4).sum();
  Vec3 g;
  for (int i = 0; i < 3; ++i) g[i] = 4.0 * std::pow(xi[i], 3) / r3 - 3.0 * S * xi[i] / r5;
  Mat3 H;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double dij = i == j ? 1.0 : 0.0;
      H(i, j) = 12.0 * xi[i] * xi[i] * dij / r3 -
                12.0 * (std::pow(xi[i], 3) * xi[j] + xi[i] * std::pow(xi[j], 3)) / r5 - 3.0 * S * dij / r5 +
                15.0 * S * xi[i] * xi[j] / r7;
    }
  return {S / r3, g, H};
}

// |xi_h|^8 / |xi|^7
Piece equatorial_bump(const Vec3& xi) {
  const double rho2 = xi[0] * xi[0] + xi[1] * xi[1];
  const double r2 = xi.squaredNorm(), r = std::sqrt(r2);
  const double P = std::pow(rho2, 4);
  const Vec3 xh(xi[0], xi[1], 0.0);
  const Vec3 dP = 8.0 * std::pow(rho2, 3) * xh;
  Mat3 Ih = Mat3::Zero();
  Ih(0, 0) = Ih(1, 1) = 1.0;
  const Mat3 d2P = 8.0 * std::pow(rho2, 3) * Ih + 48.0 * rho2 * rho2 * xh * xh.transpose();
  const double Q = std::pow(r, -7);
  const Vec3 dQ = -7.0 * std::pow(r, -9) * xi;
  const Mat3 d2Q = -7.0 * std::pow(r, -9) * Mat3::Identity() + 63.0 * std::pow(r, -11) * xi * xi.transpose();
  return {P * Q, dP * Q + P * dQ, d2P * Q + dP * dQ.transpose() + dQ * dP.transpose() + P * d2Q};
}

Piece evaluate_all(const Anisotropy& psi, const Vec3& xi) {
  require_nonzero(xi);
  switch (psi.family()) {
    case Anisotropy::Family::isotropic:
      return euclidean(xi);
    case Anisotropy::Family::cubic: {
      const Piece e = euclidean(xi), c = quartic(xi);
      const double a = psi.cubic_a();
      return {e.v + a * c.v, e.g + a * c.g, e.H + a * c.H};
    }
    case Anisotropy::Family::faceted: {
      const double beta = psi.facet_radius(), gamma = psi.facet_height();
      const double eta = psi.smoothing() / beta;
      const Piece e = euclidean(xi);
      const Piece q = quadratic_norm(xi, Vec3(1.0 + eta * eta, 1.0 + eta * eta, eta * eta));
      const Piece b = equatorial_bump(xi);
      const double lin = gamma - beta * eta;
      const double k = psi.bump();
      return {lin * e.v + beta * q.v + k * b.v, lin * e.g + beta * q.g + k * b.g,
              lin * e.H + beta * q.H + k * b.H};
    }
  }
  throw std::logic_error("anisotropy: unknown family");
}

}  // namespace

Anisotropy Anisotropy::isotropic() { return Anisotropy{}; }

Anisotropy Anisotropy::cubic(double a) {
  // psi >= |xi|(1 + a/3) must stay positive.
  if (!std::isfinite(a) || a <= -1.0)
    throw std::invalid_argument("cubic anisotropy: parameter a must be finite and > -1");
  Anisotropy psi;
  psi.family_ = Family::cubic;
  psi.a_ = a;
  return psi;
}

Anisotropy Anisotropy::faceted(double beta, double gamma, double smoothing, double bump) {
  if (!(beta > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("faceted anisotropy: beta and gamma must be positive");
  if (smoothing <= 0.0) smoothing = 1e-3 * gamma;
  if (bump < 0.0) bump = 0.25 * gamma;
  if (smoothing >= gamma)
    throw std::invalid_argument("faceted anisotropy: smoothing must be smaller than gamma");
  Anisotropy psi;
  psi.family_ = Family::faceted;
  psi.beta_ = beta;
  psi.gamma_ = gamma;
  psi.smoothing_ = smoothing;
  psi.bump_ = bump;
  psi.eta_ = smoothing / beta;
  return psi;
}

std::string Anisotropy::tag() const {
  switch (family_) {
    case Family::isotropic: return "isotropic";
    case Family::cubic: return "cubic";
    case Family::faceted: return "faceted";
  }
  return "unknown";
}

double Anisotropy::value(const Vec3& xi) const { return evaluate_all(*this, xi).v; }
Vec3 Anisotropy::gradient(const Vec3& xi) const { return evaluate_all(*this, xi).g; }
Mat3 Anisotropy::hessian(const Vec3& xi) const { return evaluate_all(*this, xi).H; }

double Anisotropy::bound_constant() const {
  double lo = 1.0, hi = 1.0;
  switch (family_) {
    case Family::isotropic:
      break;
    case Family::cubic:
      // (xi1^4 + xi2^4 + xi3^4) / |xi|^4 ranges over [1/3, 1].
      lo = 1.0 + std::min(a_ / 3.0, a_);
      hi = 1.0 + std::max(a_ / 3.0, a_);
      break;
    case Family::faceted:
      // q_eta(xi) lies in [eta |xi|, sqrt(1 + eta^2) |xi|]; the bump in [0, bump |xi|].
      lo = gamma_;
      hi = gamma_ + beta_ * (std::sqrt(1.0 + eta_ * eta_) - eta_) + bump_;
      break;
  }
  return std::max(hi, 1.0 / lo);
}

double tangential_convexity(const Anisotropy& psi, const Vec3& xi, const Vec3& w1, const Vec3& w2) {
  const Mat3 H = psi.hessian(xi);
  const double a = w1.dot(H * w1), b = w1.dot(H * w2), c = w2.dot(H * w2);
  // Smaller eigenvalue of the symmetric 2x2 [[a, b], [b, c]].
  return 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
}

double tangential_convexity(const Anisotropy& psi, const Vec3& xi) {
  const Vec3 u = xi.normalized();
  const Vec3 seed = std::abs(u[0]) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 w1 = (seed - seed.dot(u) * u).normalized();
  const Vec3 w2 = u.cross(w1);
  return tangential_convexity(psi, u, w1, w2);
}

std::vector<Vec3> sphere_samples(int count) {
  std::vector<Vec3> out;
  out.reserve(count);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * k;
    out.emplace_back(r * std::cos(phi), r * std::sin(phi), z);
  }
  return out;
}

WulffReport wulff_facet_test(const Anisotropy& psi, int samples) {
  if (samples < 1000) throw std::invalid_argument("wulff_facet_test: need at least 1000 samples");
  constexpr double tol = 1e-8;
  WulffReport rep;
  rep.samples = samples;
  rep.facet_height = psi.value(Vec3::UnitZ());
  const double gamma = rep.facet_height;

  // The top point (0, gamma) is on the boundary (equality at nu = e3); a disk of
  // radius b at that height lies in the closure of W iff, for every normal,
  // b |nu_h| + gamma nu_3 <= psi(nu).
  double radius = std::numeric_limits<double>::infinity();
  double min_polar = std::numbers::pi;
  double min_hess = std::numeric_limits<double>::infinity();
  bool top_inside = true;
  for (const Vec3& nu : sphere_samples(samples)) {
    const double t = std::hypot(nu[0], nu[1]);
    const double slack = psi.value(nu) - gamma * nu[2];
    if (slack < -tol) top_inside = false;
    if (t > 0.0) radius = std::min(radius, (slack + tol) / t);
    if (nu[2] > 0.0) min_polar = std::min(min_polar, std::atan2(t, nu[2]));
    min_hess = std::min(min_hess, tangential_convexity(psi, nu));
  }
  rep.min_tangential_hessian = min_hess;
  rep.resolution = 2.0 * gamma * min_polar;
  if (!top_inside || !std::isfinite(radius)) radius = 0.0;
  rep.facet_radius = std::max(0.0, radius);
  // A strictly convex top of curvature radius ~gamma already passes the test
  // for radii up to about gamma * min_polar / 2 at this sampling density.
  rep.facet_found = rep.facet_radius > rep.resolution;
  if (!rep.facet_found) rep.facet_radius = 0.0;
  return rep;
}

}  // namespace filmflow
