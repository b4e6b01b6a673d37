#include <CLI11.hpp>

#include <iostream>

#include "filmflow/app.hpp"

using namespace filmflow;

int main(int argc, char** argv) {
  CLI::App app{"filmflow: evaporation-condensation evolution of strained epitaxial films"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override, key=value (repeatable; beats the file)")->allow_extra_args(false);
  };
  CLI::App* simulate = app.add_subcommand("simulate", "run the minimizing-movements evolution");
  CLI::App* stability = app.add_subcommand("stability", "flat-configuration stability experiment");
  CLI::App* check = app.add_subcommand("check", "run the invariant self-test battery");
  CLI::App* energy = app.add_subcommand("energy", "energy breakdown of the initial configuration");
  for (CLI::App* sub : {simulate, stability, check, energy}) add_common(sub);
  stability->add_option("--jobs", jobs, "threads for the second-variation spectrum")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_validation;
  }

  RunConfig cfg;
  try {
    cfg = load_config(config_path, overrides);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return exit_validation;
  }

  try {
    if (*simulate) return command_simulate(cfg, std::cout, std::cerr);
    if (*stability) return command_stability(cfg, jobs, std::cout, std::cerr);
    if (*check) return command_check(cfg, std::cout, std::cerr);
    return command_energy(cfg, std::cout, std::cerr);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}
