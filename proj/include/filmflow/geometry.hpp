#pragma once

#include <array>
#include <vector>

#include "filmflow/grid.hpp"

namespace filmflow {

// Periodic second-order central differences. ddx/ddy use the two-point
// stencil (f[i+1] - f[i-1]) / 2s, whose adjoint under the grid sum is its
// negative; that identity is what makes discrete divergences telescope.
Field ddx(const Field& f, const GridSpec& spec);
Field ddy(const Field& f, const GridSpec& spec);
/// ddx(fx) + ddy(fy)
Field divergence(const Field& fx, const Field& fy, const GridSpec& spec);

/// Compact three-point second derivatives and the four-point mixed stencil.
/// Entries are (xx, xy, yy).
std::vector<std::array<double, 3>> hessian(const Field& f, const GridSpec& spec);

/// Fixed-order sum; reductions over the grid go through here so results are
/// reproducible run to run.
double grid_sum(const Field& f);

/// Slopes, area element and curvature sum: the pieces the energy needs.
struct GraphKinematics {
  Field gx, gy;  // Dh
  Field area;    // J = sqrt(1 + |Dh|^2)
  Field curv;    // H = -div(Dh / J), flux form
};

GraphKinematics kinematics(const GridProfile& h);

/// Full differential geometry of the graph of h.
struct SurfaceGeometry {
  GridSpec spec;
  std::vector<std::array<double, 2>> grad;
  std::vector<std::array<double, 3>> hess;  // symmetric, (xx, xy, yy)
  Field area_elem;
  std::vector<std::array<double, 3>> normal;  // (-Dh, 1) / J
  Field curvature_sum;                        // H, flux form
  Field shape_norm_sq;                        // |B|^2 = k1^2 + k2^2
  Field principal_sum;                        // k1 + k2 from the eigenvalues of S
  Field shape_trace;                          // tr S, expanded formula
};

/// Throws std::invalid_argument naming the first non-finite sample.
SurfaceGeometry differentiate(const GridProfile& h);

/// H from the expanded form -Lap h / J + <D^2h Dh, Dh> / J^3 (compact
/// second-derivative stencils). Agrees with the flux form to O(spacing^2).
Field expanded_curvature(const GridProfile& h);

/// Discrete W^{2,p} norm (sum (|h|^p + |Dh|^p + |D^2h|^p) s^2)^{1/p}; p > 2.
double sobolev_w2p_norm(const GridProfile& h, double p);

/// max over the grid of |Dh|.
double lipschitz_seminorm(const GridProfile& h);

}  // namespace filmflow
