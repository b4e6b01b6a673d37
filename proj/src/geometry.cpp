#include "filmflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace filmflow {

Field ddx(const Field& f, const GridSpec& spec) {
  const int n = spec.n;
  const double inv = 1.0 / (2.0 * spec.spacing());
  Field out(f.size());
  for (int i = 0; i < n; ++i) {
    const int ip = wrap(i + 1, n), im = wrap(i - 1, n);
    for (int j = 0; j < n; ++j) out[i * n + j] = (f[ip * n + j] - f[im * n + j]) * inv;
  }
  return out;
}

Field ddy(const Field& f, const GridSpec& spec) {
  const int n = spec.n;
  const double inv = 1.0 / (2.0 * spec.spacing());
  Field out(f.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out[i * n + j] = (f[i * n + wrap(j + 1, n)] - f[i * n + wrap(j - 1, n)]) * inv;
  return out;
}

Field divergence(const Field& fx, const Field& fy, const GridSpec& spec) {
  Field out = ddx(fx, spec);
  const Field dy = ddy(fy, spec);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += dy[k];
  return out;
}

std::vector<std::array<double, 3>> hessian(const Field& f, const GridSpec& spec) {
  const int n = spec.n;
  const double s2 = spec.spacing() * spec.spacing();
  std::vector<std::array<double, 3>> out(f.size());
  auto at = [&](int i, int j) { return f[wrap(i, n) * n + wrap(j, n)]; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double c = at(i, j);
      out[i * n + j] = {(at(i + 1, j) - 2.0 * c + at(i - 1, j)) / s2,
                        (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4.0 * s2),
                        (at(i, j + 1) - 2.0 * c + at(i, j - 1)) / s2};
    }
  return out;
}

double grid_sum(const Field& f) {
  // Pairwise summation keeps the rounding error at O(log N) ulps.
  auto rec = [&](auto&& self, std::size_t lo, std::size_t hi) -> double {
    if (hi - lo <= 64) {
      double s = 0.0;
      for (std::size_t k = lo; k < hi; ++k) s += f[k];
      return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return self(self, lo, mid) + self(self, mid, hi);
  };
  return rec(rec, 0, f.size());
}

GraphKinematics kinematics(const GridProfile& h) {
  const GridSpec& spec = h.spec();
  GraphKinematics k;
  k.gx = ddx(h.values(), spec);
  k.gy = ddy(h.values(), spec);
  k.area.resize(h.size());
  Field qx(h.size()), qy(h.size());
  for (std::size_t p = 0; p < h.size(); ++p) {
    k.area[p] = std::sqrt(1.0 + k.gx[p] * k.gx[p] + k.gy[p] * k.gy[p]);
    qx[p] = k.gx[p] / k.area[p];
    qy[p] = k.gy[p] / k.area[p];
  }
  k.curv = divergence(qx, qy, spec);
  for (double& v : k.curv) v = -v;
  return k;
}

SurfaceGeometry differentiate(const GridProfile& h) {
  h.require_finite("differentiate");
  const GraphKinematics kin = kinematics(h);
  const auto hess = hessian(h.values(), h.spec());

  SurfaceGeometry g;
  g.spec = h.spec();
  g.grad.resize(h.size());
  g.hess = hess;
  g.area_elem = kin.area;
  g.normal.resize(h.size());
  g.curvature_sum = kin.curv;
  g.shape_norm_sq.resize(h.size());
  g.principal_sum.resize(h.size());
  g.shape_trace.resize(h.size());

  for (std::size_t p = 0; p < h.size(); ++p) {
    const double gx = kin.gx[p], gy = kin.gy[p], J = kin.area[p];
    g.grad[p] = {gx, gy};
    g.normal[p] = {-gx / J, -gy / J, 1.0 / J};

    // Shape operator S = -(1/J) (I + Dh Dh^T)^{-1} D^2h, with
    // (I + Dh Dh^T)^{-1} = I - Dh Dh^T / J^2.
    const double hxx = hess[p][0], hxy = hess[p][1], hyy = hess[p][2];
    const double J2 = J * J;
    const double m00 = 1.0 - gx * gx / J2, m01 = -gx * gy / J2, m11 = 1.0 - gy * gy / J2;
    const double s00 = -(m00 * hxx + m01 * hxy) / J;
    const double s01 = -(m00 * hxy + m01 * hyy) / J;
    const double s10 = -(m01 * hxx + m11 * hxy) / J;
    const double s11 = -(m01 * hxy + m11 * hyy) / J;
    const double tr = s00 + s11;
    const double det = s00 * s11 - s01 * s10;
    // S is similar to a symmetric matrix, so the discriminant is >= 0 up to rounding.
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    const double k1 = 0.5 * tr + disc, k2 = 0.5 * tr - disc;
    g.principal_sum[p] = k1 + k2;
    g.shape_norm_sq[p] = k1 * k1 + k2 * k2;

    const double lap = hxx + hyy;
    const double quad = hxx * gx * gx + 2.0 * hxy * gx * gy + hyy * gy * gy;
    g.shape_trace[p] = -lap / J + quad / (J2 * J);
  }
  return g;
}

Field expanded_curvature(const GridProfile& h) {
  return differentiate(h).shape_trace;
}

double sobolev_w2p_norm(const GridProfile& h, double p) {
  if (!(p > 2.0)) throw std::invalid_argument("sobolev_w2p_norm: exponent must satisfy p > 2");
  const GridSpec& spec = h.spec();
  const Field gx = ddx(h.values(), spec), gy = ddy(h.values(), spec);
  const auto hess = hessian(h.values(), spec);
  Field integrand(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double grad = std::hypot(gx[k], gy[k]);
    const double d2 = std::sqrt(hess[k][0] * hess[k][0] + 2.0 * hess[k][1] * hess[k][1] + hess[k][2] * hess[k][2]);
    integrand[k] = std::pow(std::abs(h[k]), p) + std::pow(grad, p) + std::pow(d2, p);
  }
  return std::pow(grid_sum(integrand) * spec.cell_area(), 1.0 / p);
}

double lipschitz_seminorm(const GridProfile& h) {
  const Field gx = ddx(h.values(), h.spec()), gy = ddy(h.values(), h.spec());
  double m = 0.0;
  for (std::size_t k = 0; k < gx.size(); ++k) m = std::max(m, std::hypot(gx[k], gy[k]));
  return m;
}

}  // namespace filmflow
