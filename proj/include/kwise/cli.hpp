#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace kwise::cli {

inline constexpr int kSchemaVersion = 1;

// One invocation of the command-line tool. Fields unused by a subcommand are
// ignored and left out of its report.
struct RunConfig {
  std::string subcommand;  // gray, modm, m4, verify, pascal, perc
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = ".";
  std::string format = "csv";  // csv or json: where walk tables go
  unsigned jobs = 1;
  bool emit_path = false;

  // gray
  std::int64_t horizon = 1024;
  std::string order = "gray";

  // modm, m4, verify
  int k = 2;
  int m = 4;
  double eps = 0.1;
  std::optional<double> lambda;
  std::int64_t L = 8;
  std::size_t trials = 10000;
  int checkpoints = 5;
  std::string construction = "m4";  // iid, gray, m4, modm
  std::string mode = "exact";       // exact or mc
  std::size_t tuples = 100;
  unsigned J = 10;
  double alpha = 0.01;

  // pascal
  std::int64_t n = 5;
  std::int64_t rows = 20;

  // perc
  std::int64_t side = 8;
  double p = 0.5;
  std::size_t samples = 10000;
};

// Parses argv into a RunConfig. --out falls back to $KWISE_OUTPUT_DIR, then
// the working directory. Throws CLI11 parse errors; `exit_code` receives the
// code for --help style exits.
std::optional<RunConfig> parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                                    int& exit_code);

// Runs the subcommand and writes <subcommand>_report.json (plus
// <subcommand>_path.csv for --emit-path with --format csv) into output_dir.
// Returns 0 iff every assertion of the run held; 2 on invalid parameters.
int run(const RunConfig& config, std::ostream& log, std::ostream& err);

// Names of the files run() writes for this configuration.
std::vector<std::filesystem::path> artifact_paths(const RunConfig& config);

}  // namespace kwise::cli
