#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace filmflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Surface-tension density psi: positively one-homogeneous and C^2 on R^3 \ {0}.
///
/// Built-in families:
///  - isotropic:  psi(xi) = |xi|
///  - cubic(a):   psi(xi) = |xi| (1 + a (xi1^4 + xi2^4 + xi3^4) / |xi|^4)
///  - faceted(beta, gamma, smoothing, bump):
///      psi(xi) = gamma |xi| + beta (q_eta(xi) - eta |xi|) + bump |xi_h|^8 / |xi|^7
///    with q_eta(xi) = sqrt(|xi_h|^2 + eta^2 |xi|^2), xi_h = (xi1, xi2) and
///    eta = smoothing / beta. As smoothing -> 0 the first two terms tend to
///    the support function of the disk {|x| <= beta} swept by the ball of
///    radius gamma, so the Wulff shape carries the flat top facet
///    {|x| <= beta, y = gamma}. The bump term vanishes to eighth order at the
///    poles and makes psi non-convex near the equator (for bump > gamma / 7).
class Anisotropy {
 public:
  enum class Family { isotropic, cubic, faceted };

  static Anisotropy isotropic();
  static Anisotropy cubic(double a);
  /// smoothing <= 0 selects the default 1e-3 * gamma; bump < 0 selects 0.25 * gamma.
  static Anisotropy faceted(double beta, double gamma, double smoothing = -1.0, double bump = -1.0);

  Family family() const { return family_; }
  std::string tag() const;
  double cubic_a() const { return a_; }
  double facet_radius() const { return beta_; }
  double facet_height() const { return gamma_; }
  double smoothing() const { return smoothing_; }
  double bump() const { return bump_; }

  /// Throws std::invalid_argument for xi = 0.
  double value(const Vec3& xi) const;
  Vec3 gradient(const Vec3& xi) const;
  Mat3 hessian(const Vec3& xi) const;

  /// A constant c with |xi| / c <= psi(xi) <= c |xi|.
  double bound_constant() const;

 private:
  Family family_ = Family::isotropic;
  double a_ = 0.0;
  double beta_ = 0.0, gamma_ = 0.0, smoothing_ = 0.0, bump_ = 0.0, eta_ = 0.0;
};

/// min <D^2 psi(xi) w, w> over unit w orthogonal to the unit vector xi: the
/// smaller eigenvalue of the Hessian restricted to xi^perp.
double tangential_convexity(const Anisotropy& psi, const Vec3& xi);

/// Same, with an explicit orthonormal basis (w1, w2) of xi^perp.
double tangential_convexity(const Anisotropy& psi, const Vec3& xi, const Vec3& w1, const Vec3& w2);

/// Deterministic, nearly uniform directions on S^2 (Fibonacci lattice).
std::vector<Vec3> sphere_samples(int count);

struct WulffReport {
  bool facet_found = false;
  double facet_radius = 0.0;  // beta: largest sampled-consistent radius
  double facet_height = 0.0;  // gamma = psi(e3)
  double resolution = 0.0;    // radius a smooth strictly convex top could fake at this sampling
  double min_tangential_hessian = 0.0;
  int samples = 0;
};

/// Support-plane test for a horizontal facet on the top of the Wulff shape
/// W = {z : z.nu < psi(nu) for all nu in S^2}. Requires samples >= 1000.
WulffReport wulff_facet_test(const Anisotropy& psi, int samples);

}  // namespace filmflow
