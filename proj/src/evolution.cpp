#include "filmflow/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "filmflow/geometry.hpp"

namespace filmflow {

void EvolutionParams::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("evolution: tau must be > 0");
  if (!(T >= tau) || !std::isfinite(T)) throw std::invalid_argument("evolution: final time T must satisfy T >= tau");
  if (!(lambda0 > 0.0)) throw std::invalid_argument("evolution: lambda0 must be > 0");
  if (!(c0_fraction > 0.0 && c0_fraction < 1.0))
    throw std::invalid_argument("evolution: C0 fraction must lie in (0, 1)");
  if (max_retries < 0) throw std::invalid_argument("evolution: max_retries must be >= 0");
}

double EvolutionTrace::dissipation_constant() const { return 2.0 * std::sqrt(1.0 + lambda0 * lambda0); }

namespace {

double curvature_regularity_density(const GridProfile& h, double p) {
  const GraphKinematics kin = kinematics(h);
  Field f(h.size());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = signed_power(kin.curv[k], p);
  const auto d2 = hessian(f, h.spec());
  Field sq(f.size());
  for (std::size_t k = 0; k < f.size(); ++k)
    sq[k] = d2[k][0] * d2[k][0] + 2.0 * d2[k][1] * d2[k][1] + d2[k][2] * d2[k][2];
  return grid_sum(sq) * h.spec().cell_area();
}

TraceRecord make_record(long step, double time, double tau, const GridProfile& h, const EnergyBreakdown& e) {
  TraceRecord r;
  r.step = step;
  r.time = time;
  r.tau = tau;
  r.h = h;
  r.energy = e;
  r.min_h = h.min();
  r.lipschitz = lipschitz_seminorm(h);
  return r;
}

}  // namespace

EvolutionTrace run(const GridProfile& h0, const Anisotropy& psi, const ElasticSolver& solver,
                   const EvolutionParams& params, StepParams step_params, const StepObserver& observer) {
  params.validate();
  step_params.reg.tau = params.tau;
  step_params.reg.lambda0 = params.lambda0;
  step_params.validate();
  h0.require_finite("initial profile");
  if (!(h0.min() > 0.0)) throw std::invalid_argument("evolution: initial profile must be positive");
  if (!(lipschitz_seminorm(h0) < params.lambda0))
    throw std::invalid_argument("evolution: initial profile must satisfy |Dh0| < lambda0");

  EvolutionTrace trace;
  trace.c0 = params.c0_fraction * h0.min();
  trace.lambda0 = params.lambda0;

  ElasticState state = solver.solve(h0);
  const EnergyBreakdown e0 = total_energy(h0, state, psi, step_params.reg);
  trace.initial_energy = e0.total;
  trace.records.push_back(make_record(0, 0.0, 0.0, h0, e0));
  if (observer) observer(trace.records.back(), nullptr);

  const double p = step_params.reg.p;
  double t = 0.0;
  long step = 0;
  while (t < params.T * (1.0 - 1e-12)) {
    double tau = std::min(params.tau, params.T - t);
    int retries = 0;
    StepRecord rec;
    bool ok = false;
    std::string failure;
    for (;;) {
      step_params.reg.tau = tau;
      try {
        rec = minimize_step(trace.records.back().h, state, psi, solver, step_params);
        if (rec.converged) {
          ok = true;
        } else {
          std::ostringstream msg;
          msg << "step " << step + 1 << " did not converge (residual " << rec.el_residual << ")";
          failure = msg.str();
        }
      } catch (const ElasticSolveError& err) {
        failure = err.what();
      }
      if (ok || retries >= params.max_retries) break;
      ++retries;
      tau *= 0.5;
    }
    if (!ok) {
      trace.stop_reason = failure;
      break;
    }

    const GridProfile& prev = trace.records.back().h;
    const double min_h = rec.h_new.min();
    const double lip = lipschitz_seminorm(rec.h_new);
    std::ostringstream why;
    if (min_h < trace.c0) {
      why << "safeguard: min h = " << min_h << " fell below C0 = " << trace.c0 << " at t = " << t + tau;
    } else if (lip >= params.lambda0 && params.stop_on_saturation) {
      why << "safeguard: |Dh| = " << lip << " reached lambda0 = " << params.lambda0 << " at t = " << t + tau;
    }
    if (!why.str().empty()) {
      trace.safeguard_stop = true;
      trace.stop_reason = why.str();
      break;
    }
    if (rec.breakdown.total > trace.records.back().energy.total + 1e-10) {
      trace.monotone = false;
      std::ostringstream msg;
      msg << "energy increased at step " << step + 1 << ": " << trace.records.back().energy.total << " -> "
          << rec.breakdown.total;
      trace.stop_reason = msg.str();
      break;
    }

    Field dh2(prev.size());
    for (std::size_t k = 0; k < dh2.size(); ++k) {
      const double d = rec.h_new[k] - prev[k];
      dh2[k] = d * d;
    }
    trace.dissipation += grid_sum(dh2) * prev.spec().cell_area() / tau;
    trace.curvature_regularity += tau * curvature_regularity_density(rec.h_new, p);

    t += tau;
    ++step;
    TraceRecord r = make_record(step, t, tau, rec.h_new, rec.breakdown);
    r.el_residual = rec.el_residual;
    r.outer_iterations = rec.outer_iterations;
    r.inner_iterations = rec.inner_iterations;
    r.retries = retries;
    r.converged = rec.converged;
    r.constraint_active = rec.constraint_active;
    r.wall_time = rec.wall_time;
    trace.records.push_back(std::move(r));
    if (observer) observer(trace.records.back(), &rec);
    state = std::move(rec.state);
  }
  trace.completed = trace.stop_reason.empty();
  trace.empirical_T0 = trace.last_time();
  return trace;
}

namespace {

void require_in_range(const EvolutionTrace& trace, double t) {
  if (trace.records.empty()) throw std::invalid_argument("interpolation: empty trace");
  if (!(t >= 0.0) || t > trace.last_time()) {
    std::ostringstream msg;
    msg << "interpolation: time " << t << " outside [0, " << trace.last_time() << "]";
    throw std::out_of_range(msg.str());
  }
}

}  // namespace

GridProfile interpolate_linear(const EvolutionTrace& trace, double t) {
  require_in_range(trace, t);
  const auto& R = trace.records;
  // First record with time >= t.
  const auto it = std::lower_bound(R.begin(), R.end(), t, [](const TraceRecord& r, double x) { return r.time < x; });
  const std::size_t i = static_cast<std::size_t>(it - R.begin());
  if (R[i].time == t || i == 0) return R[i].h;
  const TraceRecord& a = R[i - 1];
  const TraceRecord& b = R[i];
  const double w = (t - a.time) / (b.time - a.time);
  GridProfile out = a.h;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = a.h[k] + w * (b.h[k] - a.h[k]);
  return out;
}

std::size_t constant_index(const EvolutionTrace& trace, double t) {
  require_in_range(trace, t);
  const auto& R = trace.records;
  if (R.size() == 1) return 0;
  // First record with time > t; the final time maps to the last record.
  const auto it = std::upper_bound(R.begin(), R.end(), t, [](double x, const TraceRecord& r) { return x < r.time; });
  return it == R.end() ? R.size() - 1 : static_cast<std::size_t>(it - R.begin());
}

std::pair<GridProfile, ElasticState> interpolate_constant(const EvolutionTrace& trace, double t,
                                                          const ElasticSolver& solver) {
  const GridProfile& h = trace.records[constant_index(trace, t)].h;
  return {h, solver.solve(h)};
}

HolderReport holder_time_diagnostic(const EvolutionTrace& trace, double p) {
  if (trace.records.empty()) throw std::invalid_argument("holder_time_diagnostic: empty trace");
  if (!(p > 2.0)) throw std::invalid_argument("holder_time_diagnostic: p must be > 2");
  HolderReport rep;
  rep.exponent = (p * p - 4.0) / (8.0 * p * p);
  const auto& R = trace.records;
  for (std::size_t i = 0; i < R.size(); ++i)
    for (std::size_t j = i + 1; j < R.size(); ++j) {
      const double dt = R[j].time - R[i].time;
      if (!(dt > 0.0)) continue;
      double diff = 0.0;
      for (std::size_t k = 0; k < R[i].h.size(); ++k) diff = std::max(diff, std::abs(R[j].h[k] - R[i].h[k]));
      const double c = diff / (std::pow(dt, rep.exponent) + std::sqrt(dt));
      ++rep.pairs;
      if (c > rep.constant) {
        rep.constant = c;
        rep.worst_first = i;
        rep.worst_second = j;
      }
    }
  return rep;
}

}  // namespace filmflow
