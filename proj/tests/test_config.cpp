#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "filmflow/app.hpp"
#include "filmflow/config.hpp"

using namespace filmflow;

namespace {

bool mentions(const ConfigError& e, const std::string& what) {
  return std::any_of(e.problems.begin(), e.problems.end(),
                     [&](const std::string& p) { return p.find(what) != std::string::npos; });
}

ConfigError parse_error(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_config(text, overrides, "t.cfg");
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected a ConfigError");
  return ConfigError({});
}

}  // namespace

TEST_CASE("defaults parse and validate") {
  const RunConfig c = parse_config("");
  CHECK(c == RunConfig{});
  CHECK(validate(c).empty());
}

TEST_CASE("sections, comments and typed values") {
  const RunConfig c = parse_config(
      "experiment = stability-lyapunov  # trailing comment\n"
      "\n"
      "[grid]\n"
      "ell = 2.5\n"
      "n = 24\n"
      "[elasticity]\n"
      "e1 = 0.01\n"
      "[evolution]\n"
      "stop_on_saturation = false\n");
  CHECK(c.experiment == "stability-lyapunov");
  CHECK(c.ell == 2.5);
  CHECK(c.n == 24);
  CHECK(c.e1 == 0.01);
  CHECK_FALSE(c.stop_on_saturation);
}

TEST_CASE("invalid physics is rejected with every problem listed") {
  const ConfigError e = parse_error("[grid]\nell = -1\n[regularization]\np = 2\n");
  CHECK(mentions(e, "grid.ell must be > 0"));
  CHECK(mentions(e, "p > 2"));
  CHECK(e.problems.size() >= 2);
}

TEST_CASE("unknown and duplicate keys carry line numbers") {
  const ConfigError e = parse_error("[grid]\nn = 16\nn = 32\nwidth = 3\n[bogus]\n");
  CHECK(mentions(e, "t.cfg:3: duplicate key 'grid.n'"));
  CHECK(mentions(e, "t.cfg:4: unknown key 'grid.width'"));
  CHECK(mentions(e, "t.cfg:5: unknown section [bogus]"));
  CHECK(mentions(parse_error("[grid]\nn = sixteen\n"), "t.cfg:2: grid.n"));
  CHECK(mentions(parse_error("[grid]\nn 16\n"), "expected 'key = value'"));
}

TEST_CASE("overrides take precedence over the file") {
  const RunConfig c = parse_config("[grid]\nn = 16\n", {"grid.n=40", "regularization.epsilon = 0.002"});
  CHECK(c.n == 40);
  CHECK(c.epsilon == 0.002);
  CHECK(mentions(parse_error("", {"grid.size=3"}), "unknown key 'grid.size'"));
  CHECK(mentions(parse_error("", {"grid.n"}), "expected key=value"));
  CHECK(mentions(parse_error("", {"regularization.p=1.5"}), "p > 2"));
}

TEST_CASE("serialization round trip is exact") {
  RunConfig c;
  c.experiment = "stability-asymptotic";
  c.ell = 1.0 / 3.0;
  c.tau = 0.1 + 0.2;
  c.T = 0.9;
  c.e1 = 1e-17 * 3.0;
  c.family = "faceted";
  c.initial = "sinusoid";
  c.amplitude = 0.01;
  c.voigt.assign(36, 0.0);
  for (int i = 0; i < 6; ++i) c.voigt[7 * i] = 2.0 + i / 7.0;
  c.voigt[1] = c.voigt[6] = 0.3;
  const std::string text = serialize(c);
  CHECK(parse_config(text) == c);
  CHECK(serialize(parse_config(text)) == text);
  // Every key appears exactly once.
  for (const std::string& key : config_keys()) {
    const std::string name = key.substr(key.find('.') + 1);
    CHECK(("\n" + text).find("\n" + name + " = ") != std::string::npos);
  }
}

TEST_CASE("builders reflect the configuration") {
  const RunConfig c = parse_config(
      "[grid]\nell = 2\nn = 16\nlayers = 6\n[anisotropy]\nfamily = cubic\ncubic_a = 0.1\n"
      "[elasticity]\ne1 = 0.01\ne2 = 0.02\n[initial]\nkind = sinusoid\nd = 0.3\namplitude = 0.05\nk1 = 1\nk2 = 2\n");
  CHECK(grid_of(c) == GridSpec{2.0, 16});
  CHECK(mesh_of(c).layers == 6);
  CHECK(anisotropy_of(c).family() == Anisotropy::Family::cubic);
  CHECK(mismatch_of(c) == Mismatch{0.01, 0.02});
  const GridProfile h = initial_profile_of(c);
  CHECK(h(0, 0) == doctest::Approx(0.35));
  CHECK(h.mean() == doctest::Approx(0.3));
  CHECK(step_params_of(c).reg.tau == c.tau);
  CHECK(evolution_params_of(c).T == c.T);
}

TEST_CASE("file initial data is read and checked") {
  const auto dir = std::filesystem::temp_directory_path() / "filmflow_config_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "h0.txt").string();
  write_profile_file(path, GridProfile(GridSpec{1.0, 16}, 0.2));
  const RunConfig c = parse_config("[grid]\nn = 16\n[initial]\nkind = file\npath = " + path + "\n");
  CHECK(initial_profile_of(c).mean() == doctest::Approx(0.2));
  CHECK(mentions(parse_error("[grid]\nn = 32\n[initial]\nkind = file\npath = " + path + "\n"), "initial"));
  CHECK(mentions(parse_error("[initial]\nkind = file\n"), "initial.path is required"));
}

TEST_CASE("shipped configurations are valid") {
  for (const auto& entry : std::filesystem::directory_iterator(std::string(FILMFLOW_SOURCE_DIR) + "/configs")) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path().string()));
  }
}

TEST_CASE("energy command is deterministic") {
  const RunConfig c = parse_config("[grid]\nn = 8\nlayers = 4\n[elasticity]\ne1 = 0.02\ne2 = 0.02\n"
                                   "[initial]\nkind = sinusoid\namplitude = 0.01\n");
  std::ostringstream a, b, err;
  CHECK(command_energy(c, a, err) == exit_ok);
  CHECK(command_energy(c, b, err) == exit_ok);
  CHECK(a.str() == b.str());
  CHECK_FALSE(a.str().empty());
}
