#include "filmflow/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "filmflow/geometry.hpp"

namespace filmflow {

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : "\n") + s;
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("expected a number, got '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::string tok;
  std::istringstream is(s);
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(parse_double(tok));
  }
  return out;
}

struct Entry {
  std::string key;  // "section.name" or bare top-level name
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Entry make_entry(std::string key, T RunConfig::*member) {
  Entry e;
  e.key = std::move(key);
  if constexpr (std::is_same_v<T, double>) {
    e.set = [member](RunConfig& c, const std::string& v) { c.*member = parse_double(v); };
    e.get = [member](const RunConfig& c) { return format_double(c.*member); };
  } else if constexpr (std::is_same_v<T, int>) {
    e.set = [member](RunConfig& c, const std::string& v) { c.*member = parse_int(v); };
    e.get = [member](const RunConfig& c) { return std::to_string(c.*member); };
  } else if constexpr (std::is_same_v<T, bool>) {
    e.set = [member](RunConfig& c, const std::string& v) { c.*member = parse_bool(v); };
    e.get = [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); };
  } else if constexpr (std::is_same_v<T, std::string>) {
    e.set = [member](RunConfig& c, const std::string& v) { c.*member = v; };
    e.get = [member](const RunConfig& c) { return c.*member; };
  } else {
    e.set = [member](RunConfig& c, const std::string& v) { c.*member = parse_list(v); };
    e.get = [member](const RunConfig& c) {
      std::string out;
      for (double x : c.*member) out += (out.empty() ? "" : ", ") + format_double(x);
      return out;
    };
  }
  return e;
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      make_entry("experiment", &RunConfig::experiment),
      make_entry("output_dir", &RunConfig::output_dir),
      make_entry("dump_every", &RunConfig::dump_every),
      make_entry("grid.ell", &RunConfig::ell),
      make_entry("grid.n", &RunConfig::n),
      make_entry("grid.layers", &RunConfig::layers),
      make_entry("anisotropy.family", &RunConfig::family),
      make_entry("anisotropy.cubic_a", &RunConfig::cubic_a),
      make_entry("anisotropy.facet_radius", &RunConfig::facet_radius),
      make_entry("anisotropy.facet_height", &RunConfig::facet_height),
      make_entry("anisotropy.smoothing", &RunConfig::smoothing),
      make_entry("anisotropy.bump", &RunConfig::bump),
      make_entry("elasticity.lambda", &RunConfig::lambda),
      make_entry("elasticity.mu", &RunConfig::mu),
      make_entry("elasticity.voigt", &RunConfig::voigt),
      make_entry("elasticity.e1", &RunConfig::e1),
      make_entry("elasticity.e2", &RunConfig::e2),
      make_entry("regularization.epsilon", &RunConfig::epsilon),
      make_entry("regularization.p", &RunConfig::p),
      make_entry("evolution.tau", &RunConfig::tau),
      make_entry("evolution.T", &RunConfig::T),
      make_entry("evolution.lambda0", &RunConfig::lambda0),
      make_entry("evolution.c0_fraction", &RunConfig::c0_fraction),
      make_entry("evolution.max_retries", &RunConfig::max_retries),
      make_entry("evolution.stop_on_saturation", &RunConfig::stop_on_saturation),
      make_entry("solver.method", &RunConfig::method),
      make_entry("solver.max_outer", &RunConfig::max_outer),
      make_entry("solver.max_inner", &RunConfig::max_inner),
      make_entry("solver.el_tol", &RunConfig::el_tol),
      make_entry("solver.armijo", &RunConfig::armijo),
      make_entry("solver.shrink", &RunConfig::shrink),
      make_entry("solver.memory", &RunConfig::memory),
      make_entry("solver.cg_tol", &RunConfig::cg_tol),
      make_entry("solver.cg_cap_factor", &RunConfig::cg_cap_factor),
      make_entry("initial.kind", &RunConfig::initial),
      make_entry("initial.d", &RunConfig::d),
      make_entry("initial.amplitude", &RunConfig::amplitude),
      make_entry("initial.k1", &RunConfig::k1),
      make_entry("initial.k2", &RunConfig::k2),
      make_entry("initial.path", &RunConfig::path),
      make_entry("stability.delta", &RunConfig::delta),
      make_entry("stability.sigma", &RunConfig::sigma),
      make_entry("stability.kmax", &RunConfig::kmax),
      make_entry("stability.sphere_samples", &RunConfig::sphere_samples),
  };
  return entries;
}

const Entry* find_entry(const std::string& key) {
  for (const Entry& e : registry())
    if (e.key == key) return &e;
  return nullptr;
}

// Collects messages from a constructor that throws std::invalid_argument.
template <class F>
void capture(std::vector<std::string>& problems, const std::string& prefix, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    problems.push_back(prefix + e.what());
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems_)
    : std::runtime_error("invalid configuration:\n" + join(problems_)), problems(std::move(problems_)) {}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Entry& e : registry()) out.push_back(e.key);
  return out;
}

RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides, const std::string& origin) {
  RunConfig cfg;
  std::vector<std::string> problems;
  std::set<std::string> seen;
  std::string section;
  std::istringstream is{std::string(text)};
  std::string raw;
  int line_no = 0;
  auto where = [&] { return origin + ":" + std::to_string(line_no) + ": "; };
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        problems.push_back(where() + "malformed section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const Entry& e : registry()) known = known || e.key.rfind(section + ".", 0) == 0;
      if (!known) problems.push_back(where() + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back(where() + "expected 'key = value', got '" + line + "'");
      continue;
    }
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string key = section.empty() ? name : section + "." + name;
    const Entry* entry = find_entry(key);
    if (!entry) {
      problems.push_back(where() + "unknown key '" + key + "'");
      continue;
    }
    if (!seen.insert(key).second) {
      problems.push_back(where() + "duplicate key '" + key + "'");
      continue;
    }
    capture(problems, where() + key + ": ", [&] { entry->set(cfg, value); });
  }
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) {
      problems.push_back("override '" + ov + "': expected key=value");
      continue;
    }
    const std::string key = trim(ov.substr(0, eq));
    const Entry* entry = find_entry(key);
    if (!entry) {
      problems.push_back("override: unknown key '" + key + "'");
      continue;
    }
    capture(problems, "override " + key + ": ", [&] { entry->set(cfg, trim(ov.substr(eq + 1))); });
  }
  if (problems.empty()) problems = validate(cfg);
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open configuration file '" + path + "'"});
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides, path);
}

std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> v;
  const std::set<std::string> experiments = {"simulate", "stability-lyapunov", "stability-asymptotic", "check"};
  if (!experiments.count(c.experiment))
    v.push_back("experiment must be one of simulate, stability-lyapunov, stability-asymptotic, check");
  if (c.output_dir.empty()) v.push_back("output_dir must not be empty");
  if (c.dump_every < 0) v.push_back("dump_every must be >= 0");

  if (!(c.ell > 0.0) || !std::isfinite(c.ell)) v.push_back("grid.ell must be > 0");
  if (c.n < 8) v.push_back("grid.n must be >= 8");
  if (c.layers < 4) v.push_back("grid.layers must be >= 4");

  if (c.family != "isotropic" && c.family != "cubic" && c.family != "faceted")
    v.push_back("anisotropy.family must be isotropic, cubic or faceted");
  else
    capture(v, "anisotropy: ", [&] { anisotropy_of(c); });

  if (!c.voigt.empty() && c.voigt.size() != 36) v.push_back("elasticity.voigt must list 36 entries");
  else capture(v, "elasticity: ", [&] { tensor_of(c); });
  if (!(c.e1 >= 0.0) || !(c.e2 >= 0.0) || !std::isfinite(c.e1) || !std::isfinite(c.e2))
    v.push_back("elasticity.e1 and elasticity.e2 must be >= 0");

  if (!(c.epsilon > 0.0)) v.push_back("regularization.epsilon must be > 0");
  if (!(c.p > 2.0)) v.push_back("regularization.p must satisfy p > 2");

  if (!(c.tau > 0.0)) v.push_back("evolution.tau must be > 0");
  if (!(c.T >= c.tau)) v.push_back("evolution.T must be >= evolution.tau");
  if (!(c.lambda0 > 0.0)) v.push_back("evolution.lambda0 must be > 0");
  if (!(c.c0_fraction > 0.0 && c.c0_fraction < 1.0)) v.push_back("evolution.c0_fraction must lie in (0, 1)");
  if (c.max_retries < 0) v.push_back("evolution.max_retries must be >= 0");

  if (c.method != "quasi-newton" && c.method != "projected-gradient")
    v.push_back("solver.method must be quasi-newton or projected-gradient");
  if (c.max_outer < 1 || c.max_inner < 1) v.push_back("solver.max_outer and solver.max_inner must be >= 1");
  if (!(c.el_tol > 0.0)) v.push_back("solver.el_tol must be > 0");
  if (!(c.armijo > 0.0 && c.armijo < 0.5)) v.push_back("solver.armijo must lie in (0, 0.5)");
  if (!(c.shrink > 0.0 && c.shrink < 1.0)) v.push_back("solver.shrink must lie in (0, 1)");
  if (c.memory < 1) v.push_back("solver.memory must be >= 1");
  if (!(c.cg_tol > 0.0 && c.cg_tol < 1.0)) v.push_back("solver.cg_tol must lie in (0, 1)");
  if (!(c.cg_cap_factor > 0.0)) v.push_back("solver.cg_cap_factor must be > 0");

  if (c.initial != "flat" && c.initial != "sinusoid" && c.initial != "file") {
    v.push_back("initial.kind must be flat, sinusoid or file");
  } else if (c.initial == "file" && c.path.empty()) {
    v.push_back("initial.path is required when initial.kind = file");
  } else if (!(c.d > 0.0)) {
    v.push_back("initial.d must be > 0");
  } else if (c.ell > 0.0 && c.n >= 8) {
    try {
      const GridProfile h0 = initial_profile_of(c);
      if (!(h0.min() > 0.0)) v.push_back("initial profile must be strictly positive");
      if (!(lipschitz_seminorm(h0) < c.lambda0)) v.push_back("initial profile must satisfy |Dh0| < evolution.lambda0");
    } catch (const std::exception& e) {
      v.push_back(std::string("initial: ") + e.what());
    }
  }

  if (!(c.delta >= 0.0)) v.push_back("stability.delta must be >= 0");
  if (c.kmax < 1) v.push_back("stability.kmax must be >= 1");
  if (c.sphere_samples < 1000) v.push_back("stability.sphere_samples must be >= 1000");
  return v;
}

std::string serialize(const RunConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const Entry& e : registry()) {
    const auto dot = e.key.find('.');
    const std::string sec = dot == std::string::npos ? "" : e.key.substr(0, dot);
    const std::string name = dot == std::string::npos ? e.key : e.key.substr(dot + 1);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << name << " = " << e.get(cfg) << '\n';
  }
  return os.str();
}

GridSpec grid_of(const RunConfig& c) {
  GridSpec g{c.ell, c.n};
  g.validate();
  return g;
}

SlabMesh mesh_of(const RunConfig& c) {
  SlabMesh m{grid_of(c), c.layers};
  m.validate();
  return m;
}

Anisotropy anisotropy_of(const RunConfig& c) {
  if (c.family == "isotropic") return Anisotropy::isotropic();
  if (c.family == "cubic") return Anisotropy::cubic(c.cubic_a);
  if (c.family == "faceted") return Anisotropy::faceted(c.facet_radius, c.facet_height, c.smoothing, c.bump);
  throw std::invalid_argument("unknown anisotropy family '" + c.family + "'");
}

ElasticTensor tensor_of(const RunConfig& c) {
  if (c.voigt.empty()) return ElasticTensor::lame(c.lambda, c.mu);
  if (c.voigt.size() != 36) throw std::invalid_argument("Voigt matrix needs 36 entries");
  Mat6 m;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) m(i, j) = c.voigt[6 * i + j];
  return ElasticTensor::from_voigt(m);
}

Mismatch mismatch_of(const RunConfig& c) {
  Mismatch m{c.e1, c.e2};
  m.validate();
  return m;
}

SolverOptions solver_options_of(const RunConfig& c) { return {c.cg_tol, c.cg_cap_factor}; }

RegularizationParams regularization_of(const RunConfig& c) {
  RegularizationParams r{c.epsilon, c.p, c.tau, c.lambda0};
  r.validate();
  return r;
}

StepParams step_params_of(const RunConfig& c) {
  StepParams s;
  s.reg = regularization_of(c);
  s.method = parse_descent_method(c.method);
  s.max_outer = c.max_outer;
  s.max_inner = c.max_inner;
  s.el_tol = c.el_tol;
  s.armijo = c.armijo;
  s.shrink = c.shrink;
  s.memory = c.memory;
  s.validate();
  return s;
}

EvolutionParams evolution_params_of(const RunConfig& c) {
  EvolutionParams e;
  e.T = c.T;
  e.tau = c.tau;
  e.lambda0 = c.lambda0;
  e.c0_fraction = c.c0_fraction;
  e.max_retries = c.max_retries;
  e.stop_on_saturation = c.stop_on_saturation;
  e.validate();
  return e;
}

GridProfile initial_profile_of(const RunConfig& c) {
  const GridSpec g = grid_of(c);
  if (c.initial == "flat") return GridProfile(g, c.d);
  if (c.initial == "sinusoid") {
    const double w = 2.0 * std::numbers::pi / c.ell;
    return sample(g, [&](double x1, double x2) { return c.d + c.amplitude * std::cos(w * (c.k1 * x1 + c.k2 * x2)); });
  }
  if (c.initial == "file") {
    GridProfile h = read_profile_file(c.path);
    if (!(h.spec() == g)) throw std::invalid_argument("profile file '" + c.path + "' does not match the configured grid");
    return h;
  }
  throw std::invalid_argument("unknown initial profile kind '" + c.initial + "'");
}

StabilityProblem stability_problem_of(const RunConfig& c, int jobs) {
  StabilityProblem pr;
  pr.d = c.d;
  pr.psi = anisotropy_of(c);
  pr.evolution = evolution_params_of(c);
  pr.step = step_params_of(c);
  pr.delta = c.delta;
  pr.sigma = c.sigma;
  pr.kmax = c.kmax;
  pr.sphere_samples = c.sphere_samples;
  pr.jobs = jobs;
  if (c.initial == "sinusoid" || c.initial == "file") {
    GridProfile shape = initial_profile_of(c);
    const double mean = grid_sum(shape.values()) / static_cast<double>(shape.size());
    for (double& v : shape.values()) v -= mean;
    pr.shape = shape;
  }
  return pr;
}

}  // namespace filmflow
