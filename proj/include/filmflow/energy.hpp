#pragma once

#include <iosfwd>

#include "filmflow/anisotropy.hpp"
#include "filmflow/elasticity.hpp"
#include "filmflow/grid.hpp"

namespace filmflow {

struct RegularizationParams {
  double epsilon = 1e-3;
  double p = 3.0;
  double tau = 1e-3;
  double lambda0 = 10.0;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
};

struct EnergyBreakdown {
  double elastic = 0.0;
  double surface_aniso = 0.0;
  double surface_reg = 0.0;
  double penalization = 0.0;
  double total = 0.0;  // elastic + surface_aniso + surface_reg

  /// G = total + penalization
  double objective() const { return total + penalization; }
};

/// CSV columns: step,time,elastic,surface_aniso,surface_reg,penalization,total
void write_energy_csv_header(std::ostream& os);
void write_energy_csv_row(std::ostream& os, long step, double time, const EnergyBreakdown& e);

/// Anisotropic part sum psi(-Dh, 1) s^2 and regularization (eps/p) sum |H|^p J s^2.
EnergyBreakdown surface_energy(const GridProfile& h, const Anisotropy& psi, const RegularizationParams& params);

/// Surface parts on h plus the elastic energy of `state`, which must be solved on h.
EnergyBreakdown total_energy(const GridProfile& h, const ElasticState& state, const Anisotropy& psi,
                             const RegularizationParams& params);

/// (1 / 2 tau) sum (h - h_prev)^2 / J_prev s^2 with J_prev the area element of h_prev.
double penalization(const GridProfile& h, const GridProfile& h_prev, double tau);

/// The four pieces of the first-variation density; their sum is the field g
/// with sum g phi s^2 = dG(h)[phi].
struct VariationTerms {
  Field elastic;      // shape derivative of the discrete elastic energy
  Field anisotropy;   // Dx psi_1(-Dh, 1) + Dy psi_2(-Dh, 1)
  Field curvature;    // variation of (eps/p) sum |H|^p J s^2
  Field velocity;     // (h - h_prev) / (tau J_prev); zero without h_prev

  Field total() const;
};

/// `h_prev == nullptr` drops the velocity term (pure configuration-energy
/// gradient). The elastic term is the derivative along h of the energy of the
/// frozen nodal field of `state`, evaluated at h.
VariationTerms first_variation_terms(const GridProfile& h, const ElasticState& state, const GridProfile* h_prev,
                                     const Anisotropy& psi, const RegularizationParams& params);

Field first_variation(const GridProfile& h, const ElasticState& state, const GridProfile* h_prev,
                      const Anisotropy& psi, const RegularizationParams& params);

/// <g, phi> assembled term by term from the Euler-Lagrange form: trace
/// term, <Dpsi(-Dh, 1), (-Dphi, 0)>, (eps/p)|H|^p <Dh, Dphi>/J, the curvature
/// term eps |H|^{p-2} H J dH[phi] and the velocity term, all with the stencils
/// of the energy (no summation by parts).
double el_pairing(const GridProfile& h, const ElasticState& state, const GridProfile* h_prev, const Anisotropy& psi,
                  const RegularizationParams& params, const Field& phi);

/// The same pairing with H in the expanded form and compact second
/// differences of h and phi:
///   eps |H|^{p-2} H [ -Lap phi + <D^2phi Dh, Dh>/J^2 + Lap h <Dh, Dphi>/J^2
///                     + 2 <D^2h Dh, Dphi>/J^2 - 3 <Dh, Dphi> <D^2h Dh, Dh>/J^4 ].
/// Differs from el_pairing by O(s^2).
double el_pairing_expanded(const GridProfile& h, const ElasticState& state, const GridProfile* h_prev,
                           const Anisotropy& psi, const RegularizationParams& params, const Field& phi);

/// Discrete L^2 norm (sum f^2 s^2)^{1/2}.
double l2_norm(const Field& f, const GridSpec& spec);
/// sum f g s^2
double l2_dot(const Field& f, const Field& g, const GridSpec& spec);

/// |H|^{p-2} H, with the value 0 at H = 0.
double signed_power(double H, double p);

}  // namespace filmflow
