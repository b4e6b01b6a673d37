#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "filmflow/stepper.hpp"

namespace filmflow {

struct EvolutionParams {
  double T = 1e-2;
  double tau = 1e-3;
  double lambda0 = 10.0;
  double c0_fraction = 0.5;  // C0 = c0_fraction * min h0
  int max_retries = 3;       // tau-halving retries of a failed step
  bool stop_on_saturation = true;  // stop when |Dh| reaches lambda0

  void validate() const;
};

/// One recorded configuration of the discrete-time evolution.
struct TraceRecord {
  long step = 0;
  double time = 0.0;
  double tau = 0.0;  // step length that produced it (0 for the initial datum)
  GridProfile h;
  EnergyBreakdown energy;  // F(h_i, u_i); penalization of the producing step
  double el_residual = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  int retries = 0;
  bool converged = true;
  bool constraint_active = false;
  double min_h = 0.0;
  double lipschitz = 0.0;
  double wall_time = 0.0;
};

struct EvolutionTrace {
  std::vector<TraceRecord> records;  // records[0] is the initial datum
  double initial_energy = 0.0;       // F(h0, u0)
  double dissipation = 0.0;          // sum tau_i sum ((h_i - h_{i-1}) / tau_i)^2 s^2
  double curvature_regularity = 0.0; // sum tau_i sum |D^2(|H_i|^{p-2} H_i)|^2 s^2
  double c0 = 0.0;
  double lambda0 = 0.0;
  double empirical_T0 = 0.0;  // last time whose profile passed the safeguards
  bool completed = false;     // reached T
  bool safeguard_stop = false;
  bool monotone = true;       // F_i <= F_{i-1} + 1e-10 throughout
  std::string stop_reason;

  double last_time() const { return records.empty() ? 0.0 : records.back().time; }
  /// C(lambda0) = 2 sqrt(1 + lambda0^2)
  double dissipation_constant() const;
  bool dissipation_bound_holds() const { return dissipation <= dissipation_constant() * initial_energy; }
};

using StepObserver = std::function<void(const TraceRecord&, const StepRecord*)>;

/// Minimizing-movements loop from h0 up to time T. After every step the
/// safeguards min h >= C0 and |Dh|_inf < lambda0 are checked; a violating
/// profile is not recorded and the run stops with empirical_T0 = last safe
/// time. A step that fails to converge is retried with half the time step, at
/// most max_retries times. `observer` sees each recorded entry (the initial
/// datum with a null step record).
EvolutionTrace run(const GridProfile& h0, const Anisotropy& psi, const ElasticSolver& solver,
                   const EvolutionParams& params, StepParams step_params, const StepObserver& observer = {});

/// h_{i-1} + (t - t_{i-1}) / tau_i (h_i - h_{i-1}) on [t_{i-1}, t_i].
GridProfile interpolate_linear(const EvolutionTrace& trace, double t);

/// h_i on [t_{i-1}, t_i) (the last record at the final time), with its
/// elastic equilibrium re-solved by `solver`.
std::pair<GridProfile, ElasticState> interpolate_constant(const EvolutionTrace& trace, double t,
                                                          const ElasticSolver& solver);
/// Index of the record the constant interpolant selects at time t.
std::size_t constant_index(const EvolutionTrace& trace, double t);

struct HolderReport {
  double constant = 0.0;  // smallest C with |h(t2) - h(t1)|_inf <= C (dt^a + dt^(1/2))
  double exponent = 0.0;  // a = (p^2 - 4) / (8 p^2)
  std::size_t worst_first = 0, worst_second = 0;
  std::size_t pairs = 0;
};

HolderReport holder_time_diagnostic(const EvolutionTrace& trace, double p);

}  // namespace filmflow
