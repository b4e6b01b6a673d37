#include "filmflow/stepper.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "filmflow/geometry.hpp"

namespace filmflow {

std::string to_string(DescentMethod m) {
  return m == DescentMethod::quasi_newton ? "quasi-newton" : "projected-gradient";
}

DescentMethod parse_descent_method(const std::string& s) {
  if (s == "quasi-newton") return DescentMethod::quasi_newton;
  if (s == "projected-gradient") return DescentMethod::projected_gradient;
  throw std::invalid_argument("unknown descent method '" + s + "' (expected quasi-newton or projected-gradient)");
}

void StepParams::validate() const {
  reg.validate();
  if (max_outer < 1 || max_inner < 1) throw std::invalid_argument("step iteration caps must be >= 1");
  if (!(el_tol > 0.0)) throw std::invalid_argument("step residual tolerance must be > 0");
  if (!(armijo > 0.0 && armijo < 0.5)) throw std::invalid_argument("Armijo factor must lie in (0, 0.5)");
  if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("backtracking shrink must lie in (0, 1)");
  if (memory < 1) throw std::invalid_argument("quasi-Newton memory must be >= 1");
}

namespace {

// G with the nodal displacement of `state` frozen.
class FrozenObjective {
 public:
  FrozenObjective(const GridProfile& h_prev, const ElasticState& state, const Anisotropy& psi,
                  const RegularizationParams& reg)
      : h_prev_(h_prev), state_(state), psi_(psi), reg_(reg) {}

  double value(const GridProfile& h) const {
    const double el = state_.mismatch.is_zero() ? 0.0 : frozen_energy(state_, h);
    return el + surface_energy(h, psi_, reg_).total + penalization(h, h_prev_, reg_.tau);
  }
  Field gradient(const GridProfile& h) const { return first_variation(h, state_, &h_prev_, psi_, reg_); }

 private:
  const GridProfile& h_prev_;
  const ElasticState& state_;
  const Anisotropy& psi_;
  const RegularizationParams& reg_;
};

struct InnerResult {
  int iterations = 0;
  bool moved = false;
  bool constraint_hit = false;
};

bool feasible(const GridProfile& h, double lambda0, bool& gradient_violation) {
  gradient_violation = false;
  for (std::size_t k = 0; k < h.size(); ++k)
    if (!(h[k] > 0.0) || !std::isfinite(h[k])) return false;
  if (lipschitz_seminorm(h) > lambda0) {
    gradient_violation = true;
    return false;
  }
  return true;
}

// Limited-memory BFGS (or preconditioned gradient descent) on the frozen
// objective, with inner product sum a b s^2 and the diagonal preconditioner
// tau J_prev that inverts the penalization Hessian.
InnerResult descend(GridProfile& h, const FrozenObjective& obj, const Field& precond, double stop_norm,
                    const StepParams& params) {
  const GridSpec& spec = h.spec();
  const std::size_t N = h.size();
  InnerResult out;
  std::deque<std::pair<Field, Field>> pairs;  // (s, y)
  const int memory = params.method == DescentMethod::quasi_newton ? params.memory : 0;

  double G = obj.value(h);
  Field g = obj.gradient(h);
  Field d(N);
  for (; out.iterations < params.max_inner; ++out.iterations) {
    if (l2_norm(g, spec) <= stop_norm) break;

    // Two-loop recursion.
    Field q = g;
    std::vector<double> alpha(pairs.size());
    for (std::size_t m = pairs.size(); m-- > 0;) {
      const auto& [s, y] = pairs[m];
      alpha[m] = l2_dot(s, q, spec) / l2_dot(y, s, spec);
      for (std::size_t k = 0; k < N; ++k) q[k] -= alpha[m] * y[k];
    }
    double gamma = 1.0;
    if (!pairs.empty()) {
      const auto& [s, y] = pairs.back();
      Field Dy(N);
      for (std::size_t k = 0; k < N; ++k) Dy[k] = precond[k] * y[k];
      gamma = l2_dot(s, y, spec) / l2_dot(y, Dy, spec);
    }
    for (std::size_t k = 0; k < N; ++k) q[k] *= gamma * precond[k];
    for (std::size_t m = 0; m < pairs.size(); ++m) {
      const auto& [s, y] = pairs[m];
      const double beta = l2_dot(y, q, spec) / l2_dot(y, s, spec);
      for (std::size_t k = 0; k < N; ++k) q[k] += (alpha[m] - beta) * s[k];
    }
    for (std::size_t k = 0; k < N; ++k) d[k] = -q[k];
    double slope = l2_dot(g, d, spec);
    if (!(slope < 0.0)) {
      pairs.clear();
      for (std::size_t k = 0; k < N; ++k) d[k] = -precond[k] * g[k];
      slope = l2_dot(g, d, spec);
    }

    // Backtracking with feasibility rejection. The slack absorbs rounding in
    // the evaluation of G near stationarity.
    const double slack = 1e-14 * std::max(1.0, std::abs(G));
    double step = 1.0;
    bool accepted = false;
    GridProfile trial = h;
    double G_trial = 0.0;
    for (int tries = 0; tries < 60; ++tries, step *= params.shrink) {
      for (std::size_t k = 0; k < N; ++k) trial[k] = h[k] + step * d[k];
      bool grad_violation = false;
      if (!feasible(trial, params.reg.lambda0, grad_violation)) {
        out.constraint_hit = out.constraint_hit || grad_violation;
        continue;
      }
      G_trial = obj.value(trial);
      if (G_trial <= G + params.armijo * step * slope + slack) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!pairs.empty()) {
        pairs.clear();
        continue;
      }
      break;
    }

    Field g_new = obj.gradient(trial);
    Field s(N), y(N);
    for (std::size_t k = 0; k < N; ++k) {
      s[k] = trial[k] - h[k];
      y[k] = g_new[k] - g[k];
    }
    const double sy = l2_dot(s, y, spec);
    if (memory > 0) {
      if (sy > 1e-12 * l2_norm(s, spec) * l2_norm(y, spec)) {
        pairs.emplace_back(std::move(s), std::move(y));
        if (static_cast<int>(pairs.size()) > memory) pairs.pop_front();
      } else {
        pairs.clear();
      }
    }
    h = std::move(trial);
    G = G_trial;
    g = std::move(g_new);
    out.moved = true;
  }
  return out;
}

}  // namespace

StepRecord minimize_step(const GridProfile& h_prev, const ElasticState& u_prev, const Anisotropy& psi,
                         const ElasticSolver& solver, const StepParams& params) {
  const auto start = std::chrono::steady_clock::now();
  params.validate();
  h_prev.require_finite("minimize_step");
  if (!(h_prev.min() > 0.0)) throw std::invalid_argument("minimize_step: previous profile must be positive");
  if (lipschitz_seminorm(h_prev) > params.reg.lambda0)
    throw std::invalid_argument("minimize_step: previous profile violates the gradient bound");
  if (!(u_prev.h.spec() == h_prev.spec()) || u_prev.h.values() != h_prev.values())
    throw std::invalid_argument("minimize_step: previous elastic state does not belong to the previous profile");

  const GridSpec& spec = h_prev.spec();
  Field precond(h_prev.size());
  {
    const Field gx = ddx(h_prev.values(), spec), gy = ddy(h_prev.values(), spec);
    for (std::size_t k = 0; k < precond.size(); ++k)
      precond[k] = params.reg.tau * std::sqrt(1.0 + gx[k] * gx[k] + gy[k] * gy[k]);
  }

  StepRecord rec;
  rec.objective_start = total_energy(h_prev, u_prev, psi, params.reg).total;
  GridProfile h = h_prev;
  ElasticState state = u_prev;
  const bool elastic = !solver.mismatch().is_zero();

  for (;;) {
    const Field g = first_variation(h, state, &h_prev, psi, params.reg);
    rec.el_residual = l2_norm(g, spec);
    if (rec.el_residual <= params.el_tol) {
      rec.converged = true;
      break;
    }
    if (rec.outer_iterations >= params.max_outer) break;
    ++rec.outer_iterations;

    // Without elasticity the frozen objective is the objective; otherwise
    // converge the subproblem only as far as the coupling error warrants.
    const double stop = elastic ? std::max(0.25 * params.el_tol, 1e-3 * rec.el_residual) : 0.5 * params.el_tol;
    const FrozenObjective obj(h_prev, state, psi, params.reg);
    const InnerResult inner = descend(h, obj, precond, stop, params);
    rec.inner_iterations += inner.iterations;
    rec.constraint_active = rec.constraint_active || inner.constraint_hit;
    if (!inner.moved) break;
    state = solver.solve(h, &state);
  }

  rec.h_new = std::move(h);
  rec.state = std::move(state);
  rec.breakdown = total_energy(rec.h_new, rec.state, psi, params.reg);
  rec.breakdown.penalization = penalization(rec.h_new, h_prev, params.reg.tau);
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace filmflow
