#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace tilt::app {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes shared by the subcommands.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,       ///< verification gap above tolerance, or an internal error
  kExitConfig = 2,        ///< schema violation
  kExitSolverFailures = 3,  ///< more than half of some cell's trials failed
  kExitMissingInputs = 4,   ///< figure data requested before the producing run
};

struct RunRequest {
  std::string config_path;
  std::optional<std::string> out_dir;
  std::vector<std::string> overrides;  ///< dotted key=value, applied in order
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<int> threads;
};

/// Runs the configured experiment and writes trials.csv, aggregates.csv
/// and manifest.json (plus err_lambda.csv or rate_report.json where the
/// experiment produces them). A one-line JSON status record goes to `out`,
/// error records go to `err`.
int cmd_run(const RunRequest& req, std::ostream& out, std::ostream& err);

struct VerifyRequest {
  std::string kind;
  double tol = 1e-8;
  std::size_t cases = 50;
  std::uint64_t seed = 20260101;
};

int cmd_verify(const VerifyRequest& req, std::ostream& out, std::ostream& err);

struct FigureRequest {
  std::string figure;
  std::optional<std::string> out_dir;
  /// Run directory holding the producing experiment's outputs.
  std::optional<std::string> input_dir;
};

int cmd_figure_data(const FigureRequest& req, std::ostream& out, std::ostream& err);

/// Output root: TILT_OUT_DIR when set, "results" otherwise.
std::string default_output_root();

/// Worker count: the request when given, else hardware concurrency; both
/// capped by TILT_MAX_THREADS when set.
int resolve_threads(std::optional<int> requested);

}  // namespace tilt::app
