#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "filmflow/evolution.hpp"

namespace filmflow {

enum class Regime { convex, faceted };
std::string to_string(Regime r);

/// Reduced functional without curvature regularization:
/// G(h) = W(h, u_h) + sum psi(-Dh, 1) s^2, with u_h re-solved on h.
double reduced_energy(const GridProfile& h, const Anisotropy& psi, const ElasticSolver& solver);

struct SecondVariation {
  double value = 0.0;       // step s = rel_step * d
  double half_step = 0.0;   // step s / 2
  bool richardson_ok = false;  // |value - half_step| <= 1% of max(|value|, |half_step|)
};

/// Central second difference (G(d + s phi) - 2 G(d) + G(d - s phi)) / s^2
/// with s = rel_step * d, plus the same at s / 2. `mode` must have zero
/// grid mean; throws std::invalid_argument otherwise.
SecondVariation second_variation_flat(double d, const Anisotropy& psi, const ElasticSolver& solver,
                                      const GridProfile& mode, double rel_step = 1e-3);

/// cos or sin of 2 pi (a x1 + b x2) / ell sampled on the grid.
GridProfile fourier_mode(const GridSpec& spec, int a, int b, bool sine);

struct ModeValue {
  int a = 0, b = 0;
  bool sine = false;
  SecondVariation sv;
};

/// Second variation over all Fourier modes with 0 < a^2 + b^2 <= kmax^2 (one
/// representative per +-k pair, cos and sin each). Modes are distributed over
/// `jobs` threads.
std::vector<ModeValue> second_variation_spectrum(double d, const Anisotropy& psi, const ElasticSolver& solver,
                                                 int kmax = 4, int jobs = 1);

struct StabilityProblem {
  double d = 0.1;
  Anisotropy psi;
  EvolutionParams evolution;  // T is the horizon
  StepParams step;
  GridProfile shape;          // zero-mean perturbation direction; empty selects cos(2 pi x1 / ell)
  double delta = 1e-2;        // W^{2,p} size of the initial perturbation
  double sigma = 0.0;         // Lyapunov threshold; <= 0 selects 10 delta
  int kmax = 4;
  int sphere_samples = 2000;
  int jobs = 1;
};

struct StabilityReport {
  Regime regime = Regime::convex;
  double d = 0.0, delta = 0.0, sigma = 0.0;
  // Prechecks
  double min_tangential_convexity = 0.0;
  bool hyp1 = false;
  std::vector<ModeValue> spectrum;
  bool hyp2 = false;
  bool prechecks_run = false;
  // Lyapunov data
  std::vector<double> times, distances;  // distance = |h(t) - d|_{W^{2,p}}
  double sup_distance = 0.0;
  bool bounded = false;  // sup_distance <= sigma
  // Asymptotic data (asserted only when hyp1 and hyp2 pass)
  std::vector<double> sample_times, sample_distances;  // log-spaced
  double terminal_distance = 0.0;
  double terminal_el_residual = 0.0;
  bool decay = false;
  bool asymptotic_claimed = false;
  // Run bookkeeping
  bool run_completed = false;
  std::string stop_reason;
  std::string note;
};

/// Evolves h0 = d + perturbation and records sup_t |h(t) - d|_{W^{2,p}}.
/// The evolution trace is copied to `trace` when given.
StabilityReport lyapunov_experiment(const StabilityProblem& problem, const ElasticSolver& solver,
                                    EvolutionTrace* trace = nullptr);

/// Runs the (hyp1) and (hyp2) prechecks and the long-horizon evolution. The
/// decay flag and the asymptotic claim are emitted only when both prechecks
/// pass; otherwise the report carries Lyapunov data only.
StabilityReport asymptotic_experiment(const StabilityProblem& problem, const ElasticSolver& solver,
                                      EvolutionTrace* trace = nullptr);

void write_stability_report(std::ostream& os, const StabilityReport& rep);
/// a,b,kind,value,half_step,richardson_ok
void write_spectrum_csv(std::ostream& os, const StabilityReport& rep);
/// t,distance
void write_distance_csv(std::ostream& os, const StabilityReport& rep);

}  // namespace filmflow
