#pragma once

#include <string>

#include "filmflow/anisotropy.hpp"
#include "filmflow/elasticity.hpp"
#include "filmflow/energy.hpp"

namespace filmflow {

enum class DescentMethod { projected_gradient, quasi_newton };

std::string to_string(DescentMethod m);
/// Accepts "projected-gradient" and "quasi-newton".
DescentMethod parse_descent_method(const std::string& s);

struct StepParams {
  RegularizationParams reg;
  DescentMethod method = DescentMethod::quasi_newton;
  int max_outer = 50;     // elastic re-solves per step
  int max_inner = 400;    // descent iterations per frozen-u subproblem
  double el_tol = 1e-7;   // discrete L^2 norm of the Euler-Lagrange field
  double armijo = 1e-4;
  double shrink = 0.5;
  int memory = 10;        // quasi-Newton pairs

  void validate() const;
};

struct StepRecord {
  GridProfile h_new;
  ElasticState state;           // equilibrium on h_new
  EnergyBreakdown breakdown;    // F(h_new, u_new) and P(h_new)
  double objective_start = 0.0; // G(h_prev, u_prev) = F(h_prev, u_prev)
  double el_residual = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  bool converged = false;
  bool constraint_active = false;  // a trial was rejected for |Dh| > lambda0
  double wall_time = 0.0;          // seconds
};

/// One incremental problem: minimize F(h, u_h) + P(h) over h with
/// |Dh| <= lambda0, starting from h_prev. `u_prev` must be the equilibrium on
/// h_prev. Alternates descent on h with the nodal displacement frozen and an
/// elastic re-solve; the frozen objective bounds the reduced one from above
/// and agrees with it at the re-solve point, so every accepted iterate
/// lowers the reduced objective.
StepRecord minimize_step(const GridProfile& h_prev, const ElasticState& u_prev, const Anisotropy& psi,
                         const ElasticSolver& solver, const StepParams& params);

}  // namespace filmflow
