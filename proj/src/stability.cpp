#include "filmflow/stability.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "filmflow/geometry.hpp"

namespace filmflow {

std::string to_string(Regime r) { return r == Regime::convex ? "convex" : "faceted"; }

double reduced_energy(const GridProfile& h, const Anisotropy& psi, const ElasticSolver& solver) {
  const ElasticState st = solver.solve(h);
  const Field gx = ddx(h.values(), h.spec()), gy = ddy(h.values(), h.spec());
  Field dens(h.size());
  for (std::size_t k = 0; k < dens.size(); ++k) dens[k] = psi.value(Vec3(-gx[k], -gy[k], 1.0));
  return st.energy + grid_sum(dens) * h.spec().cell_area();
}

SecondVariation second_variation_flat(double d, const Anisotropy& psi, const ElasticSolver& solver,
                                      const GridProfile& mode, double rel_step) {
  if (!(d > 0.0)) throw std::invalid_argument("second_variation_flat: d must be > 0");
  if (!(mode.spec() == solver.mesh().grid)) throw std::invalid_argument("second_variation_flat: mode grid mismatch");
  double peak = 0.0;
  for (double v : mode.values()) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) throw std::invalid_argument("second_variation_flat: mode must be nonzero");
  if (std::abs(grid_sum(mode.values())) / static_cast<double>(mode.size()) > 1e-12 * peak)
    throw std::invalid_argument("second_variation_flat: mode must have zero mean");

  const GridProfile flat(mode.spec(), d);
  const double g0 = reduced_energy(flat, psi, solver);
  auto second_difference = [&](double s) {
    GridProfile up = flat, down = flat;
    for (std::size_t k = 0; k < up.size(); ++k) {
      up[k] += s * mode[k];
      down[k] -= s * mode[k];
    }
    return (reduced_energy(up, psi, solver) - 2.0 * g0 + reduced_energy(down, psi, solver)) / (s * s);
  };
  SecondVariation sv;
  const double s = rel_step * d;
  sv.value = second_difference(s);
  sv.half_step = second_difference(0.5 * s);
  sv.richardson_ok = std::abs(sv.value - sv.half_step) <= 0.01 * std::max(std::abs(sv.value), std::abs(sv.half_step));
  return sv;
}

GridProfile fourier_mode(const GridSpec& spec, int a, int b, bool sine) {
  const double w = 2.0 * std::numbers::pi / spec.ell;
  GridProfile m = sample(spec, [&](double x1, double x2) {
    const double arg = w * (a * x1 + b * x2);
    return sine ? std::sin(arg) : std::cos(arg);
  });
  // Remove the rounding-level mean so the mode is exactly admissible.
  const double mean = grid_sum(m.values()) / static_cast<double>(m.size());
  for (double& v : m.values()) v -= mean;
  return m;
}

std::vector<ModeValue> second_variation_spectrum(double d, const Anisotropy& psi, const ElasticSolver& solver,
                                                 int kmax, int jobs) {
  std::vector<ModeValue> modes;
  for (int a = 0; a <= kmax; ++a)
    for (int b = -kmax; b <= kmax; ++b) {
      if (a * a + b * b == 0 || a * a + b * b > kmax * kmax) continue;
      if (a == 0 && b < 0) continue;  // (a, b) and (-a, -b) give the same modes
      const int n = solver.mesh().grid.n;
      if (2 * std::max(std::abs(a), std::abs(b)) >= n) continue;  // unresolved on the grid
      modes.push_back({a, b, false, {}});
      modes.push_back({a, b, true, {}});
    }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < modes.size(); i = next++) {
      ModeValue& m = modes[i];
      m.sv = second_variation_flat(d, psi, solver, fourier_mode(solver.mesh().grid, m.a, m.b, m.sine));
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(modes.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return modes;
}

namespace {

double distance_to_flat(const GridProfile& h, double d, double p) {
  GridProfile diff = h;
  for (double& v : diff.values()) v -= d;
  return sobolev_w2p_norm(diff, p);
}

GridProfile initial_profile(const StabilityProblem& pr, const GridSpec& spec) {
  GridProfile shape = pr.shape.size() ? pr.shape : fourier_mode(spec, 1, 0, false);
  if (!(shape.spec() == spec)) throw std::invalid_argument("stability: perturbation grid mismatch");
  const double norm = sobolev_w2p_norm(shape, pr.step.reg.p);
  GridProfile h0(spec, pr.d);
  if (pr.delta > 0.0) {
    if (!(norm > 0.0)) throw std::invalid_argument("stability: perturbation shape must be nonzero");
    double peak = 0.0;
    for (double v : shape.values()) peak = std::max(peak, std::abs(v));
    if (std::abs(grid_sum(shape.values())) / static_cast<double>(shape.size()) > 1e-12 * peak)
      throw std::invalid_argument("stability: perturbation must have zero mean");
    for (std::size_t k = 0; k < h0.size(); ++k) h0[k] += pr.delta / norm * shape[k];
  }
  return h0;
}

void validate_problem(const StabilityProblem& pr) {
  if (!(pr.d > 0.0)) throw std::invalid_argument("stability: d must be > 0");
  if (!(pr.delta >= 0.0)) throw std::invalid_argument("stability: delta must be >= 0");
  if (pr.kmax < 1) throw std::invalid_argument("stability: kmax must be >= 1");
  if (pr.sphere_samples < 1000) throw std::invalid_argument("stability: need at least 1000 sphere samples");
}

Regime regime_of(const Anisotropy& psi) {
  return psi.family() == Anisotropy::Family::faceted ? Regime::faceted : Regime::convex;
}

// Evolution plus the Lyapunov bookkeeping shared by both experiments.
EvolutionTrace evolve(const StabilityProblem& pr, const ElasticSolver& solver, StabilityReport& rep) {
  validate_problem(pr);
  const GridSpec& spec = solver.mesh().grid;
  rep.regime = regime_of(pr.psi);
  rep.d = pr.d;
  rep.delta = pr.delta;
  rep.sigma = pr.sigma > 0.0 ? pr.sigma : 10.0 * pr.delta;
  const double p = pr.step.reg.p;

  const GridProfile h0 = initial_profile(pr, spec);
  EvolutionTrace trace = run(h0, pr.psi, solver, pr.evolution, pr.step);
  for (const TraceRecord& r : trace.records) {
    rep.times.push_back(r.time);
    rep.distances.push_back(distance_to_flat(r.h, pr.d, p));
  }
  rep.sup_distance = *std::max_element(rep.distances.begin(), rep.distances.end());
  rep.bounded = rep.sup_distance <= rep.sigma;
  rep.run_completed = trace.completed;
  rep.stop_reason = trace.stop_reason;
  rep.terminal_distance = rep.distances.back();
  rep.terminal_el_residual = trace.records.back().el_residual;
  return trace;
}

// Decay flag and claim; left unset unless both prechecks passed.
void assess_decay(const EvolutionTrace& trace, StabilityReport& rep) {
  if (!(rep.hyp1 && rep.hyp2)) {
    rep.note = std::string("prechecks failed (") + (rep.hyp1 ? "" : "tangential convexity") +
               (!rep.hyp1 && !rep.hyp2 ? ", " : "") + (rep.hyp2 ? "" : "second variation") +
               "); Lyapunov data only";
    return;
  }

  // Log-spaced sample of the distance, from the first step to the last time.
  const auto& R = trace.records;
  if (R.size() >= 2) {
    const double t_first = R[1].time, t_last = R.back().time;
    const int samples = 12;
    std::size_t last_index = 0;
    rep.sample_times.push_back(R[0].time);
    rep.sample_distances.push_back(rep.distances[0]);
    for (int q = 0; q < samples; ++q) {
      const double t = t_first * std::pow(t_last / t_first, q / static_cast<double>(samples - 1));
      const auto it = std::lower_bound(R.begin(), R.end(), t * (1.0 - 1e-12),
                                       [](const TraceRecord& r, double x) { return r.time < x; });
      const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - R.begin()), R.size() - 1);
      if (i == last_index) continue;
      last_index = i;
      rep.sample_times.push_back(R[i].time);
      rep.sample_distances.push_back(rep.distances[i]);
    }
  }
  rep.decay = rep.sample_distances.size() >= 2 &&
              rep.sample_distances.back() <= 0.1 * rep.sample_distances.front() && rep.bounded;
  rep.asymptotic_claimed = rep.decay;
  rep.note = rep.decay ? "prechecks passed; distance decayed by a factor >= 10"
                       : "prechecks passed; decay by a factor 10 not observed within the horizon";
}

}  // namespace

StabilityReport lyapunov_experiment(const StabilityProblem& problem, const ElasticSolver& solver,
                                    EvolutionTrace* trace) {
  StabilityReport rep;
  EvolutionTrace tr = evolve(problem, solver, rep);
  if (trace) *trace = std::move(tr);
  rep.note = "Lyapunov data only";
  return rep;
}

StabilityReport asymptotic_experiment(const StabilityProblem& problem, const ElasticSolver& solver,
                                      EvolutionTrace* trace_out) {
  validate_problem(problem);
  StabilityReport rep;
  rep.prechecks_run = true;
  rep.min_tangential_convexity = std::numeric_limits<double>::infinity();
  for (const Vec3& xi : sphere_samples(problem.sphere_samples))
    rep.min_tangential_convexity = std::min(rep.min_tangential_convexity, tangential_convexity(problem.psi, xi));
  rep.hyp1 = rep.min_tangential_convexity > 0.0;
  rep.spectrum = second_variation_spectrum(problem.d, problem.psi, solver, problem.kmax, problem.jobs);
  rep.hyp2 = std::all_of(rep.spectrum.begin(), rep.spectrum.end(),
                         [](const ModeValue& m) { return m.sv.value > 0.0 && m.sv.half_step > 0.0; });

  EvolutionTrace trace = evolve(problem, solver, rep);
  assess_decay(trace, rep);
  if (trace_out) *trace_out = std::move(trace);
  return rep;
}

void write_stability_report(std::ostream& os, const StabilityReport& rep) {
  const auto old = os.precision(17);
  os << "regime = " << to_string(rep.regime) << '\n'
     << "d = " << rep.d << '\n'
     << "delta = " << rep.delta << '\n'
     << "sigma = " << rep.sigma << '\n';
  if (rep.prechecks_run) {
    double sv_min = std::numeric_limits<double>::infinity();
    for (const auto& m : rep.spectrum) sv_min = std::min(sv_min, m.sv.value);
    os << "min_tangential_convexity = " << rep.min_tangential_convexity << '\n'
       << "hyp1 = " << (rep.hyp1 ? "pass" : "fail") << '\n'
       << "modes = " << rep.spectrum.size() << '\n'
       << "min_second_variation = " << sv_min << '\n'
       << "hyp2 = " << (rep.hyp2 ? "pass" : "fail") << '\n';
  }
  os << "sup_distance = " << rep.sup_distance << '\n'
     << "bounded = " << (rep.bounded ? "true" : "false") << '\n'
     << "terminal_distance = " << rep.terminal_distance << '\n'
     << "terminal_el_residual = " << rep.terminal_el_residual << '\n';
  if (rep.prechecks_run && rep.hyp1 && rep.hyp2) os << "decay = " << (rep.decay ? "true" : "false") << '\n';
  os << "asymptotic_claimed = " << (rep.asymptotic_claimed ? "true" : "false") << '\n'
     << "run_completed = " << (rep.run_completed ? "true" : "false") << '\n';
  if (!rep.stop_reason.empty()) os << "stop_reason = " << rep.stop_reason << '\n';
  os << "note = " << rep.note << '\n';
  os.precision(old);
}

void write_spectrum_csv(std::ostream& os, const StabilityReport& rep) {
  const auto old = os.precision(17);
  os << "a,b,kind,value,half_step,richardson_ok\n";
  for (const auto& m : rep.spectrum)
    os << m.a << ',' << m.b << ',' << (m.sine ? "sin" : "cos") << ',' << m.sv.value << ',' << m.sv.half_step << ','
       << (m.sv.richardson_ok ? 1 : 0) << '\n';
  os.precision(old);
}

void write_distance_csv(std::ostream& os, const StabilityReport& rep) {
  const auto old = os.precision(17);
  os << "t,distance\n";
  for (std::size_t i = 0; i < rep.times.size(); ++i) os << rep.times[i] << ',' << rep.distances[i] << '\n';
  os.precision(old);
}

}  // namespace filmflow
