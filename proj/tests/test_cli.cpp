#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "kwise/cli.hpp"

using namespace kwise::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("kwise_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_quiet(const RunConfig& c) {
  std::ostringstream log, err;
  return run(c, log, err);
}

std::optional<RunConfig> parse(std::vector<const char*> args) {
  args.insert(args.begin(), "kwise");
  std::ostringstream out, err;
  int code = 0;
  return parse_args(static_cast<int>(args.size()), args.data(), out, err, code);
}

std::vector<RunConfig> sample_configs() {
  std::vector<RunConfig> configs;
  RunConfig gray;
  gray.subcommand = "gray";
  gray.seed = 7;
  gray.horizon = 1024;
  configs.push_back(gray);
  RunConfig modm;
  modm.subcommand = "modm";
  modm.k = 2;
  modm.m = 8;
  modm.lambda = 1.0 / 32.0;
  modm.trials = 500;
  modm.emit_path = true;
  configs.push_back(modm);
  RunConfig m4;
  m4.subcommand = "m4";
  m4.k = 3;
  m4.trials = 200;
  m4.emit_path = true;
  m4.format = "json";
  configs.push_back(m4);
  RunConfig verify;
  verify.subcommand = "verify";
  verify.construction = "m4";
  verify.mode = "mc";
  verify.k = 3;
  verify.tuples = 10;
  verify.trials = 2000;
  configs.push_back(verify);
  RunConfig pascal;
  pascal.subcommand = "pascal";
  pascal.seed = 3;
  pascal.rows = 8;
  pascal.trials = 2000;
  configs.push_back(pascal);
  RunConfig perc;
  perc.subcommand = "perc";
  perc.side = 4;
  perc.k = 2;
  perc.samples = 200;
  perc.tuples = 5;
  perc.trials = 1000;
  configs.push_back(perc);
  return configs;
}

}  // namespace

TEST_CASE("identical configs give byte-identical artifacts, regardless of jobs") {
  for (auto c : sample_configs()) {
    CAPTURE(c.subcommand);
    const auto first = scratch("a");
    c.output_dir = first;
    run_quiet(c);
    c.output_dir = scratch("b");
    c.jobs = 3;
    run_quiet(c);
    for (const auto& file : artifact_paths(c)) {
      const auto a = slurp(first / file.filename());
      REQUIRE_FALSE(a.empty());
      CHECK(a == slurp(file));
    }
  }
}

TEST_CASE("a different seed changes the artifacts") {
  RunConfig c = sample_configs()[0];
  c.output_dir = scratch("s1");
  run_quiet(c);
  const auto first = slurp(c.output_dir / "gray_path.csv");
  c.seed = 8;
  run_quiet(c);
  CHECK(first != slurp(c.output_dir / "gray_path.csv"));
}

TEST_CASE("report schema") {
  RunConfig c = sample_configs()[1];
  c.lambda.reset();
  c.m = 4;
  c.output_dir = scratch("schema");
  CHECK(run_quiet(c) == 0);
  const auto report = nlohmann::json::parse(slurp(c.output_dir / "modm_report.json"));
  for (const char* key : {"schema_version", "construction", "params", "seed", "verdict", "tables", "statistics"}) {
    CHECK(report.contains(key));
  }
  CHECK(report["construction"] == "modm");
  CHECK(report["params"]["N"] == 32);
  CHECK(report["statistics"]["trimmed_set_size"] == "0");
  CHECK(report["verdict"] == "pass");
  const auto csv = slurp(c.output_dir / "modm_path.csv");
  CHECK(csv.rfind("n,S_n,S_n_mod_m\n", 0) == 0);

  RunConfig j = sample_configs()[2];
  j.output_dir = c.output_dir;
  CHECK(run_quiet(j) == 0);
  const auto m4 = nlohmann::json::parse(slurp(j.output_dir / "m4_report.json"));
  CHECK(m4["tables"]["path"].size() == 1024);
  CHECK(m4["tables"]["path"][7] == nlohmann::json({8, m4["tables"]["path"][7][1], 0}));
}

TEST_CASE("exit status follows the assertions") {
  RunConfig exact;
  exact.subcommand = "verify";
  exact.construction = "m4";
  exact.k = 5;
  exact.L = 8;
  exact.mode = "exact";
  exact.output_dir = scratch("exit");
  CHECK(run_quiet(exact) == 0);

  RunConfig dependent = exact;
  dependent.construction = "gray";
  dependent.J = 5;
  dependent.k = 3;
  CHECK(run_quiet(dependent) == 1);

  RunConfig bad = exact;
  bad.k = 0;
  bad.subcommand = "modm";
  std::ostringstream log, err;
  CHECK(run(bad, log, err) == 2);
  CHECK(err.str().find("error:") != std::string::npos);

  RunConfig modm_exact = exact;
  modm_exact.construction = "modm";
  CHECK(run_quiet(modm_exact) == 2);

  RunConfig exhausted;
  exhausted.subcommand = "modm";
  exhausted.k = 2;
  exhausted.m = 46;  // N = 2 * 46^2 exceeds the block length budget at lambda = 1
  exhausted.output_dir = exact.output_dir;
  CHECK(run_quiet(exhausted) == 3);

  // Forcing a small lambda leaves a heavy trimmed set and the hit rate fails.
  RunConfig heavy = sample_configs()[1];
  heavy.output_dir = exact.output_dir;
  CHECK(run_quiet(heavy) == 1);
}

TEST_CASE("argument parsing") {
  const auto c = parse({"verify", "--construction", "m4", "--k", "5", "--L", "8", "--mode", "exact", "--seed", "9"});
  REQUIRE(c);
  CHECK(c->subcommand == "verify");
  CHECK(c->k == 5);
  CHECK(c->L == 8);
  CHECK(c->seed == 9);
  CHECK_FALSE(parse({}));
  CHECK_FALSE(parse({"gray", "--format", "xml"}));
  CHECK_FALSE(parse({"walk"}));

  const auto lambda = parse({"modm", "--lambda", "0.5"});
  REQUIRE(lambda);
  CHECK(lambda->lambda == 0.5);
  CHECK_FALSE(parse({"modm"})->lambda.has_value());

  ::setenv("KWISE_OUTPUT_DIR", "/tmp/kwise_env_dir", 1);
  CHECK(parse({"gray"})->output_dir == fs::path("/tmp/kwise_env_dir"));
  CHECK(parse({"gray", "--out", "here"})->output_dir == fs::path("here"));
  ::unsetenv("KWISE_OUTPUT_DIR");
  CHECK(parse({"gray"})->output_dir == fs::path("."));
}
