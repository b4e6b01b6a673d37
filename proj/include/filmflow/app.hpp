#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "filmflow/config.hpp"

namespace filmflow {

/// Exit codes of the command-line front end.
enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_runtime = 2 };

/// Runs the evolution and writes config.txt, trace.csv, summary.txt and
/// optional profile dumps into cfg.output_dir.
int command_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Lyapunov or asymptotic experiment (by cfg.experiment; anything but
/// stability-lyapunov selects the asymptotic protocol). Writes report.txt,
/// spectrum.csv and distance.csv.
int command_stability(const RunConfig& cfg, int jobs, std::ostream& out, std::ostream& err);

/// Energy breakdown of the initial configuration as one CSV row.
int command_energy(const RunConfig& cfg, std::ostream& out, std::ostream& err);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Invariant battery on small grids built from the configured physics.
std::vector<CheckResult> run_checks(const RunConfig& cfg);
int command_check(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// Per-step CSV: the energy columns followed by
/// el_residual,outer_iterations,min_h,lipschitz,constraint_active,tau.
void write_trace_csv_header(std::ostream& os);
void write_trace_csv_row(std::ostream& os, const TraceRecord& r);

}  // namespace filmflow
