#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "filmflow/evolution.hpp"
#include "filmflow/stability.hpp"

namespace filmflow {

/// Everything one experiment needs. Text form: optional top-level keys, then
/// `[section]` headers with `key = value` lines; `#` starts a comment. Keys
/// are addressed as `section.key` in overrides (top-level keys bare).
struct RunConfig {
  // top level
  std::string experiment = "simulate";  // simulate | stability-lyapunov | stability-asymptotic | check
  std::string output_dir = "out";
  int dump_every = 0;  // 0: no field dumps

  // [grid]
  double ell = 1.0;
  int n = 32;
  int layers = 8;

  // [anisotropy]
  std::string family = "isotropic";  // isotropic | cubic | faceted
  double cubic_a = 0.0;
  double facet_radius = 0.5;
  double facet_height = 1.0;
  double smoothing = 0.0;  // <= 0: 1e-3 * facet_height
  double bump = -1.0;      // < 0: 0.25 * facet_height

  // [elasticity]
  double lambda = 1.0;
  double mu = 1.0;
  std::vector<double> voigt;  // 36 entries overriding (lambda, mu) when present
  double e1 = 0.0;
  double e2 = 0.0;

  // [regularization]
  double epsilon = 1e-3;
  double p = 3.0;

  // [evolution]
  double tau = 1e-3;
  double T = 1e-2;
  double lambda0 = 10.0;
  double c0_fraction = 0.5;
  int max_retries = 3;
  bool stop_on_saturation = true;

  // [solver]
  std::string method = "quasi-newton";
  int max_outer = 50;
  int max_inner = 400;
  double el_tol = 1e-7;
  double armijo = 1e-4;
  double shrink = 0.5;
  int memory = 10;
  double cg_tol = 1e-10;
  double cg_cap_factor = 20.0;

  // [initial]
  std::string initial = "flat";  // flat | sinusoid | file
  double d = 0.1;
  double amplitude = 0.0;
  int k1 = 1;
  int k2 = 0;
  std::string path;

  // [stability]
  double delta = 1e-2;
  double sigma = 0.0;  // <= 0: 10 delta
  int kmax = 4;
  int sphere_samples = 2000;

  bool operator==(const RunConfig&) const = default;
};

/// Parse or validation failure carrying every problem found.
struct ConfigError : std::runtime_error {
  explicit ConfigError(std::vector<std::string> problems);
  std::vector<std::string> problems;
};

/// Applies text, then `key=value` overrides, then validates. Throws ConfigError.
RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {},
                       const std::string& origin = "<config>");
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Every violated constraint, empty when the configuration is usable.
std::vector<std::string> validate(const RunConfig& cfg);

/// Canonical text form; parse_config(serialize(c)) == c.
std::string serialize(const RunConfig& cfg);

/// Names of all accepted keys, in serialization order.
std::vector<std::string> config_keys();

// Builders for the module objects described by a configuration.
GridSpec grid_of(const RunConfig& cfg);
SlabMesh mesh_of(const RunConfig& cfg);
Anisotropy anisotropy_of(const RunConfig& cfg);
ElasticTensor tensor_of(const RunConfig& cfg);
Mismatch mismatch_of(const RunConfig& cfg);
SolverOptions solver_options_of(const RunConfig& cfg);
RegularizationParams regularization_of(const RunConfig& cfg);
StepParams step_params_of(const RunConfig& cfg);
EvolutionParams evolution_params_of(const RunConfig& cfg);
GridProfile initial_profile_of(const RunConfig& cfg);
StabilityProblem stability_problem_of(const RunConfig& cfg, int jobs = 1);

}  // namespace filmflow
