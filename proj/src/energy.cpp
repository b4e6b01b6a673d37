#include "filmflow/energy.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "filmflow/geometry.hpp"

namespace filmflow {

void RegularizationParams::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be > 0");
  if (!(p > 2.0) || !std::isfinite(p)) throw std::invalid_argument("exponent p must satisfy p > 2");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("tau must be > 0");
  if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) throw std::invalid_argument("lambda0 must be > 0");
}

void write_energy_csv_header(std::ostream& os) {
  os << "step,time,elastic,surface_aniso,surface_reg,penalization,total\n";
}

void write_energy_csv_row(std::ostream& os, long step, double time, const EnergyBreakdown& e) {
  const auto old = os.precision(17);
  os << step << ',' << time << ',' << e.elastic << ',' << e.surface_aniso << ',' << e.surface_reg << ','
     << e.penalization << ',' << e.total << '\n';
  os.precision(old);
}

double signed_power(double H, double p) {
  if (H == 0.0) return 0.0;
  return std::pow(std::abs(H), p - 2.0) * H;
}

double l2_dot(const Field& f, const Field& g, const GridSpec& spec) {
  if (f.size() != g.size()) throw std::invalid_argument("l2_dot: size mismatch");
  Field t(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) t[k] = f[k] * g[k];
  return grid_sum(t) * spec.cell_area();
}

double l2_norm(const Field& f, const GridSpec& spec) { return std::sqrt(l2_dot(f, f, spec)); }

EnergyBreakdown surface_energy(const GridProfile& h, const Anisotropy& psi, const RegularizationParams& params) {
  h.require_finite("surface_energy");
  const GraphKinematics kin = kinematics(h);
  Field an(h.size()), reg(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) {
    an[k] = psi.value(Vec3(-kin.gx[k], -kin.gy[k], 1.0));
    reg[k] = std::pow(std::abs(kin.curv[k]), params.p) * kin.area[k];
  }
  EnergyBreakdown e;
  const double w = h.spec().cell_area();
  e.surface_aniso = grid_sum(an) * w;
  e.surface_reg = params.epsilon / params.p * grid_sum(reg) * w;
  e.total = e.surface_aniso + e.surface_reg;
  return e;
}

namespace {

void require_state_on(const GridProfile& h, const ElasticState& state, const char* what) {
  if (!(state.h.spec() == h.spec()) || state.h.values() != h.values())
    throw std::invalid_argument(std::string(what) + ": elastic state was not solved on this profile");
}

void require_same_grid(const GridProfile& a, const GridProfile& b, const char* what) {
  if (!(a.spec() == b.spec()) || a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": profiles live on different grids");
}

Field area_element(const GridProfile& h) {
  const Field gx = ddx(h.values(), h.spec()), gy = ddy(h.values(), h.spec());
  Field J(h.size());
  for (std::size_t k = 0; k < J.size(); ++k) J[k] = std::sqrt(1.0 + gx[k] * gx[k] + gy[k] * gy[k]);
  return J;
}

}  // namespace

EnergyBreakdown total_energy(const GridProfile& h, const ElasticState& state, const Anisotropy& psi,
                             const RegularizationParams& params) {
  require_state_on(h, state, "total_energy");
  EnergyBreakdown e = surface_energy(h, psi, params);
  e.elastic = state.energy;
  e.total = e.elastic + e.surface_aniso + e.surface_reg;
  return e;
}

double penalization(const GridProfile& h, const GridProfile& h_prev, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("penalization: tau must be > 0");
  require_same_grid(h, h_prev, "penalization");
  const Field Jp = area_element(h_prev);
  Field t(h.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double d = h[k] - h_prev[k];
    t[k] = d * d / Jp[k];
  }
  return grid_sum(t) * h.spec().cell_area() / (2.0 * tau);
}

Field VariationTerms::total() const {
  Field g(elastic.size());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = elastic[k] + anisotropy[k] + curvature[k] + velocity[k];
  return g;
}

VariationTerms first_variation_terms(const GridProfile& h, const ElasticState& state, const GridProfile* h_prev,
                                     const Anisotropy& psi, const RegularizationParams& params) {
  h.require_finite("first_variation");
  const GridSpec& spec = h.spec();
  const std::size_t N = h.size();
  const GraphKinematics kin = kinematics(h);

  VariationTerms t;
  t.elastic = shape_gradient(state, h);

  Field p1(N), p2(N);
  for (std::size_t k = 0; k < N; ++k) {
    const Vec3 d = psi.gradient(Vec3(-kin.gx[k], -kin.gy[k], 1.0));
    p1[k] = d[0];
    p2[k] = d[1];
  }
  t.anisotropy = divergence(p1, p2, spec);

  // R = (eps/p) sum |H|^p J, H = -div(Dh/J). With a = eps |H|^{p-2} H J and
  // b = (eps/p)|H|^p, dR[phi] = sum_m <w_m, D_m phi> and g = -div w.
  Field a(N), b(N);
  for (std::size_t k = 0; k < N; ++k) {
    const double H = kin.curv[k];
    a[k] = params.epsilon * signed_power(H, params.p) * kin.area[k];
    b[k] = params.epsilon / params.p * std::pow(std::abs(H), params.p);
  }
  const Field ax = ddx(a, spec), ay = ddy(a, spec);
  Field wx(N), wy(N);
  for (std::size_t k = 0; k < N; ++k) {
    const double J = kin.area[k], gx = kin.gx[k], gy = kin.gy[k];
    const double c = ax[k] * gx + ay[k] * gy;
    wx[k] = ax[k] / J - c * gx / (J * J * J) + b[k] * gx / J;
    wy[k] = ay[k] / J - c * gy / (J * J * J) + b[k] * gy / J;
  }
  t.curvature = divergence(wx, wy, spec);
  for (double& v : t.curvature) v = -v;

  t.velocity.assign(N, 0.0);
  if (h_prev) {
    require_same_grid(h, *h_prev, "first_variation");
    const Field Jp = area_element(*h_prev);
    for (std::size_t k = 0; k < N; ++k) t.velocity[k] = (h[k] - (*h_prev)[k]) / (params.tau * Jp[k]);
  }
  return t;
}

Field first_variation(const GridProfile& h, const ElasticState& state, const GridProfile* h_prev,
                      const Anisotropy& psi, const RegularizationParams& params) {
  return first_variation_terms(h, state, h_prev, psi, params).total();
}

namespace {

// Pieces common to both pairings: trace term and velocity term.
double lower_order_pairing(const GridProfile& h, const ElasticState& state, const GridProfile* h_prev,
                           const RegularizationParams& params, const Field& phi) {
  const GridSpec& spec = h.spec();
  double acc = l2_dot(shape_gradient(state, h), phi, spec);
  if (h_prev) {
    require_same_grid(h, *h_prev, "el_pairing");
    const Field Jp = area_element(*h_prev);
    Field v(h.size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (h[k] - (*h_prev)[k]) / (params.tau * Jp[k]);
    acc += l2_dot(v, phi, spec);
  }
  return acc;
}

}  // namespace

double el_pairing(const GridProfile& h, const ElasticState& state, const GridProfile* h_prev, const Anisotropy& psi,
                  const RegularizationParams& params, const Field& phi) {
  const GridSpec& spec = h.spec();
  if (phi.size() != h.size()) throw std::invalid_argument("el_pairing: test field has the wrong size");
  const std::size_t N = h.size();
  const GraphKinematics kin = kinematics(h);
  const Field fx = ddx(phi, spec), fy = ddy(phi, spec);

  // dH[phi] = -div(Dphi/J - Dh <Dh, Dphi>/J^3)
  Field qx(N), qy(N);
  for (std::size_t k = 0; k < N; ++k) {
    const double J = kin.area[k], gx = kin.gx[k], gy = kin.gy[k];
    const double gdf = gx * fx[k] + gy * fy[k];
    qx[k] = fx[k] / J - gx * gdf / (J * J * J);
    qy[k] = fy[k] / J - gy * gdf / (J * J * J);
  }
  const Field dH = divergence(qx, qy, spec);

  Field terms(N);
  for (std::size_t k = 0; k < N; ++k) {
    const double J = kin.area[k], gx = kin.gx[k], gy = kin.gy[k], H = kin.curv[k];
    const Vec3 d = psi.gradient(Vec3(-gx, -gy, 1.0));
    const double aniso = -(d[0] * fx[k] + d[1] * fy[k]);
    const double area = params.epsilon / params.p * std::pow(std::abs(H), params.p) * (gx * fx[k] + gy * fy[k]) / J;
    const double curv = params.epsilon * signed_power(H, params.p) * J * (-dH[k]);
    terms[k] = aniso + area + curv;
  }
  return grid_sum(terms) * spec.cell_area() + lower_order_pairing(h, state, h_prev, params, phi);
}

double el_pairing_expanded(const GridProfile& h, const ElasticState& state, const GridProfile* h_prev,
                           const Anisotropy& psi, const RegularizationParams& params, const Field& phi) {
  const GridSpec& spec = h.spec();
  if (phi.size() != h.size()) throw std::invalid_argument("el_pairing_expanded: test field has the wrong size");
  const std::size_t N = h.size();
  const SurfaceGeometry geo = differentiate(h);
  const Field fx = ddx(phi, spec), fy = ddy(phi, spec);
  const auto fh = hessian(phi, spec);

  Field terms(N);
  for (std::size_t k = 0; k < N; ++k) {
    const double gx = geo.grad[k][0], gy = geo.grad[k][1], J = geo.area_elem[k], J2 = J * J;
    const double hxx = geo.hess[k][0], hxy = geo.hess[k][1], hyy = geo.hess[k][2];
    const double H = geo.shape_trace[k];
    const double gdf = gx * fx[k] + gy * fy[k];
    const double lap_phi = fh[k][0] + fh[k][2];
    const double phi_gg = fh[k][0] * gx * gx + 2.0 * fh[k][1] * gx * gy + fh[k][2] * gy * gy;
    const double lap_h = hxx + hyy;
    const double hg_f = (hxx * gx + hxy * gy) * fx[k] + (hxy * gx + hyy * gy) * fy[k];
    const double hg_g = hxx * gx * gx + 2.0 * hxy * gx * gy + hyy * gy * gy;

    const Vec3 d = psi.gradient(Vec3(-gx, -gy, 1.0));
    const double aniso = -(d[0] * fx[k] + d[1] * fy[k]);
    const double area = params.epsilon / params.p * std::pow(std::abs(H), params.p) * gdf / J;
    const double bracket =
        -lap_phi + phi_gg / J2 + lap_h * gdf / J2 + 2.0 * hg_f / J2 - 3.0 * gdf * hg_g / (J2 * J2);
    terms[k] = aniso + area + params.epsilon * signed_power(H, params.p) * bracket;
  }
  return grid_sum(terms) * spec.cell_area() + lower_order_pairing(h, state, h_prev, params, phi);
}

}  // namespace filmflow
