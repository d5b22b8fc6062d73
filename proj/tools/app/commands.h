#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "app/config.h"

namespace ratecert::app {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitInfeasibleAtKLo = 2,
  kExitNumericalTrouble = 3,
};

/// Command-line overrides of the configuration.
struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

/// Applies the overrides and resolves jobs = 0 to the CPU count.
RunConfig Resolve(RunConfig cfg, const Overrides& overrides);

/// One certificate per sweep point (points/analyze_*.json) and summary.csv
/// with columns sweepKey,kStar,M,solveStatus,residuals,wallTime,soundness.
/// Points whose file already exists with identical parameters are reused.
int RunAnalyze(const RunConfig& cfg, std::ostream& log);

/// simulate.csv (the estimate and its metadata), ic_results.csv (one row per
/// initial condition) and worst_trajectory.csv.
int RunSimulate(const RunConfig& cfg, std::ostream& log);

/// For every k in region.k: the largest certified radius, c*, the boundary
/// polyline (region_k*.csv), invariance and soundness checks (regions.csv),
/// and the nesting of consecutive regions (nesting.csv).
int RunRegion(const RunConfig& cfg, std::ostream& log);

/// compare.csv with columns d,R,k_i,k_ii,k_sim,ratio_i_over_ii,ratio_ii_over_sim
/// for rational analysis at the fixed gain analysis.gain.
int RunCompare(const RunConfig& cfg, std::ostream& log);

/// Parses `ratecert <command> --config <file> [--out <dir>] [--seed <u64>]
/// [--jobs <n>]`, runs the command and maps failures to exit codes.
int Main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ratecert::app
