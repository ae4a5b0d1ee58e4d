#pragma once

#include <string>

#include "emergence/config.hpp"
#include "emergence/runio.hpp"

// Library entry points behind the CLI subcommands. Each runs one
// experiment, writes its artifacts under out_dir, and returns the summary
// that the CLI prints. Keeping these in the library lets tests drive them
// without spawning processes.

namespace emergence {

// Overrides applied on top of the loaded config.
struct CliOptions {
  std::string out_dir;          // empty = config output_dir
  std::uint64_t seed = 0;       // 0 = keep config seed
  int workers = 1;
};

// Writes coords_check.csv + summary.json. One CSV row per N with the
// worst-case identity deviations.
RunSummary check_coords_cmd(const ExperimentConfig& cfg, const CliOptions& opt);

// Writes trajectory.csv (+ dissipation.csv for anharmonic scenarios) and
// summary.json with drift/dissipation checks for the scenario.
RunSummary run_md_cmd(const ExperimentConfig& cfg, const CliOptions& opt);

// Writes ensemble.csv (raw samples), report.csv (cumulants),
// independence.csv, and for scaling configs scaling.csv; summary.json
// carries the fit results.
RunSummary run_ensemble_cmd(const ExperimentConfig& cfg, const CliOptions& opt);

// Writes quantum.csv (+ gap_sweep.csv when configured) and summary.json
// with purity/norm/Ehrenfest checks.
RunSummary run_quantum_cmd(const ExperimentConfig& cfg, const CliOptions& opt);

}  // namespace emergence
