#include "kwise/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <utility>

#include <CLI11.hpp>
#include <json.hpp>

#include "kwise/gray_walk.hpp"
#include "kwise/independence_lab.hpp"
#include "kwise/modm_walk.hpp"
#include "kwise/parallel.hpp"
#include "kwise/pascal.hpp"
#include "kwise/percolation.hpp"

namespace kwise::cli {

namespace {

using json = nlohmann::json;

struct Outcome {
  std::string construction;
  json params = json::object();
  json tables = json::object();
  json statistics = json::object();
  std::vector<std::pair<std::string, bool>> assertions;
  std::optional<WalkPath> path;

  void require(std::string name, bool ok) { assertions.emplace_back(std::move(name), ok); }
  bool passed() const {
    for (const auto& [name, ok] : assertions) {
      if (!ok) return false;
    }
    return true;
  }
};

json walk_rows(const WalkPath& path) {
  json rows = json::array();
  for (std::size_t i = 0; i < path.size(); ++i) {
    json row = {static_cast<std::int64_t>(i) + path.first_time, path.sums[i]};
    if (path.modulus) row.push_back(path.reduced[i]);
    rows.push_back(row);
  }
  return rows;
}

void write_csv(const std::filesystem::path& file, const WalkPath& path) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << (path.modulus ? "n,S_n,S_n_mod_m\n" : "n,S_n\n");
  for (std::size_t i = 0; i < path.size(); ++i) {
    out << static_cast<std::int64_t>(i) + path.first_time << ',' << path.sums[i];
    if (path.modulus) out << ',' << path.reduced[i];
    out << '\n';
  }
}

json summarize(const IndependenceReport& r) {
  json v = json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(r.violations.size(), 10); ++i) {
    v.push_back({{"indices", r.violations[i].indices},
                 {"statistic", r.violations[i].statistic},
                 {"p_value", r.violations[i].p_value}});
  }
  return {{"mode", std::string(to_string(r.mode))},
          {"subject", r.subject},
          {"tuples_tested", r.tuples_tested},
          {"sample_size", r.sample_size},
          {"alpha", r.alpha},
          {"max_statistic", r.max_statistic},
          {"min_p_value", r.min_p_value},
          {"violation_count", r.violation_count},
          {"violations", v},
          {"passed", r.passed}};
}

SubsetOrder parse_order(const std::string& order) {
  if (order == "gray") return SubsetOrder::Gray;
  if (order == "lex") return SubsetOrder::Lexicographic;
  throw InvalidParameter("order must be gray or lex");
}

json modm_params_json(const ModmParams& p) {
  return {{"k", p.k}, {"m", p.m_requested}, {"m_working", p.m}, {"eps", p.epsilon},
          {"lambda", p.lambda}, {"N", p.N}, {"L", p.L}};
}

// lambda from the flag when given, else from the search.
std::pair<ModmParams, std::optional<LambdaChoice>> resolve_modm(const RunConfig& c) {
  if (c.lambda) return {make_modm_params(c.k, c.m, c.eps, *c.lambda), std::nullopt};
  auto choice = choose_lambda(c.k, c.m, c.eps);
  return {choice.params, choice};
}

Outcome run_gray(const RunConfig& c) {
  if (c.horizon < 1 || c.horizon > (std::int64_t{1} << 26)) throw InvalidParameter("horizon must lie in [1, 2^26]");
  const auto order = parse_order(c.order);
  Outcome o;
  o.construction = "gray";
  o.params = {{"horizon", c.horizon}, {"order", c.order}};

  std::vector<Sign> prefix(seed_bits_for(c.horizon, order));
  SeedStream s(c.seed);
  s.fill_signs(prefix);
  const auto path = gray_walk_path(prefix, c.horizon, false, order);
  const auto ex = observe_extremes(path);
  json seed_bits = json::array();
  for (const auto x : prefix) seed_bits.push_back(x);
  o.statistics["seed_prefix"] = seed_bits;
  o.statistics["observed"] = {{"max", ex.max}, {"min", ex.min}, {"max_abs", ex.max_abs},
                              {"argmax", ex.argmax}, {"argmin", ex.argmin}};
  const auto predicted = predicted_extremes(prefix);
  if (predicted) {
    o.statistics["predicted"] = {{"first_negative", predicted->first_negative}, {"sup_abs", predicted->sup_abs},
                                 {"sup", predicted->sup}, {"inf", predicted->inf}};
    o.statistics["inf_attained"] = ex.min == predicted->inf;
  } else {
    o.statistics["predicted"] = nullptr;
  }
  if (order == SubsetOrder::Gray) {
    if (predicted) {
      o.require("max_equals_sup", ex.max == predicted->sup);
      o.require("min_above_inf", ex.min >= predicted->inf);
      o.require("abs_below_sup_abs", ex.max_abs <= predicted->sup_abs);
    } else {
      o.require("all_plus_prefix_walk", ex.max == c.horizon);
    }
  }
  o.path = path;
  return o;
}

Outcome run_modm(const RunConfig& c) {
  if (c.trials < 1) throw InvalidParameter("trials must be positive");
  if (c.checkpoints < 1 || c.checkpoints > 1000) throw InvalidParameter("checkpoints must lie in [1, 1000]");
  const auto [params, choice] = resolve_modm(c);
  const LemmaSampler sampler(params);
  const std::int64_t horizon = params.L * c.checkpoints;
  const SeedStream root(c.seed);

  struct Trial {
    std::vector<std::uint8_t> hits;
    std::map<std::int64_t, std::uint64_t> lengths;
  };
  std::vector<Trial> trials(c.trials);
  parallel_for(c.trials, c.jobs, [&](std::size_t t) {
    const auto out = assemble_sequence(sampler, horizon, root.derive(t));
    const auto walk = accumulate_walk(out.sequence, params.m);
    for (const auto I : out.checkpoints) trials[t].hits.push_back(walk.reduced[static_cast<std::size_t>(I - 1)] == 0);
    for (const auto& step : out.steps) ++trials[t].lengths[step.L_mu / params.L];
  });

  Outcome o;
  o.construction = "modm";
  o.params = modm_params_json(params);
  o.params["trials"] = c.trials;
  o.params["checkpoints"] = c.checkpoints;
  std::vector<double> rates(static_cast<std::size_t>(c.checkpoints), 0.0);
  std::map<std::int64_t, std::uint64_t> lengths;
  for (const auto& t : trials) {
    for (std::size_t j = 0; j < t.hits.size(); ++j) rates[j] += t.hits[j];
    for (const auto& [a, n] : t.lengths) lengths[a] += n;
  }
  for (auto& r : rates) r /= static_cast<double>(c.trials);
  const double floor = 1 - params.epsilon - 3 * std::sqrt(params.epsilon / static_cast<double>(c.trials));
  o.statistics["hit_rates"] = rates;
  o.statistics["hit_rate_floor"] = floor;
  json length_counts = json::object();
  for (const auto& [a, n] : lengths) length_counts[std::to_string(a)] = n;
  o.statistics["lemma_length_blocks"] = length_counts;
  o.statistics["trimmed_probability"] = sampler.classifier().trimmed_probability();
  o.statistics["trimmed_set_size"] = sampler.classifier().trimmed_size().str();
  if (choice) {
    o.statistics["predicted_tail"] =
        std::vector<double>(choice->tail.begin(), choice->tail.begin() + std::min<std::ptrdiff_t>(8, std::ssize(choice->tail)));
    o.statistics["lambda_grid_tried"] = choice->trials.size();
  }
  for (std::size_t j = 0; j < rates.size(); ++j) o.require("hit_rate_" + std::to_string(j + 1), rates[j] >= floor);
  if (c.emit_path) o.path = accumulate_walk(assemble_sequence(sampler, horizon, root.derive(0)).sequence, params.m);
  return o;
}

Outcome run_m4(const RunConfig& c) {
  if (c.trials < 1) throw InvalidParameter("trials must be positive");
  const SeedStream root(c.seed);
  std::vector<std::uint64_t> misses(c.trials, 0);
  // Validates (k, L, horizon) before spawning workers.
  { SeedStream probe(0); build_m4_sequence(c.k, c.L, c.horizon, probe); }
  parallel_for(c.trials, c.jobs, [&](std::size_t t) {
    SeedStream s = root.derive(t);
    const auto walk = accumulate_walk(build_m4_sequence(c.k, c.L, c.horizon, s), 4);
    for (std::int64_t I = c.L; I <= c.horizon; I += c.L) misses[t] += walk.reduced[static_cast<std::size_t>(I - 1)] != 0;
  });
  Outcome o;
  o.construction = "m4";
  o.params = {{"k", c.k}, {"L", c.L}, {"horizon", c.horizon}, {"trials", c.trials}};
  std::uint64_t total = 0;
  for (const auto m : misses) total += m;
  o.statistics["checkpoints_per_trial"] = c.horizon / c.L;
  o.statistics["checkpoint_misses"] = total;
  o.require("checkpoints_zero_mod_4", total == 0);
  if (c.emit_path) {
    SeedStream s = root.derive(0);
    o.path = accumulate_walk(build_m4_sequence(c.k, c.L, c.horizon, s), 4);
  }
  return o;
}

Outcome run_verify(const RunConfig& c) {
  Outcome o;
  o.construction = c.construction;
  o.params = {{"k", c.k}, {"mode", c.mode}};
  IndependenceReport report;
  if (c.mode == "exact") {
    if (c.construction == "gray") {
      o.params["J"] = c.J;
      report = verify_gray_kwise_exact(c.J, c.k, (std::int64_t{1} << c.J) - 1);
    } else if (c.construction == "m4") {
      o.params["L"] = c.L;
      report = verify_m4_kwise_exact(c.k, c.L, 2);
    } else if (c.construction == "iid") {
      o.params["J"] = c.J;
      report = exact_kwise(PackedSeedTable(iid_finite_generator(c.J)), c.k, 1, c.J, "iid");
    } else if (c.construction == "modm") {
      throw InvalidParameter("exact mode is not available for modm; use --mode mc");
    } else {
      throw InvalidParameter("construction must be iid, gray, m4 or modm");
    }
  } else if (c.mode == "mc") {
    ChiSquareConfig cfg;
    cfg.k = c.k;
    cfg.num_tuples = c.tuples;
    cfg.trials = c.trials;
    cfg.alpha = c.alpha;
    cfg.jobs = c.jobs;
    const SeedStream root(c.seed);
    cfg.tuple_seed = root.derive(1).next_u64();
    cfg.trial_seed = root.derive(2).next_u64();
    SequenceFactory factory;
    if (c.construction == "iid") {
      cfg.window_last = 64;
      factory = [](SeedStream& s, std::size_t n) { return iid_sequence(n, s).values; };
    } else if (c.construction == "gray") {
      if (c.J < 2 || c.J > 30) throw InvalidParameter("J must lie in [2, 30]");
      o.params["J"] = c.J;
      cfg.window_last = (std::int64_t{1} << c.J) - 1;
      const unsigned J = c.J;
      factory = [J](SeedStream& s, std::size_t n) {
        std::vector<Sign> prefix(J);
        s.fill_signs(prefix);
        std::vector<Sign> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = gray_sign(i + 1, prefix);
        return out;
      };
    } else if (c.construction == "m4") {
      o.params["L"] = c.L;
      cfg.window_last = 4 * c.L;
      factory = m4_factory(c.k, c.L);
    } else if (c.construction == "modm") {
      const auto params = resolve_modm(c).first;
      o.params.update(modm_params_json(params));
      cfg.window_last = 4 * params.L;
      factory = modm_factory(std::make_shared<const LemmaSampler>(params));
    } else {
      throw InvalidParameter("construction must be iid, gray, m4 or modm");
    }
    o.params["tuples"] = c.tuples;
    o.params["trials"] = c.trials;
    o.params["alpha"] = c.alpha;
    o.params["window"] = {cfg.window_first, cfg.window_last};
    const auto tuples = random_tuples(cfg.k, cfg.num_tuples, cfg.window_first, cfg.window_last, cfg.tuple_seed);
    report = verify_kwise(factory, c.k, tuples, cfg, c.construction);
  } else {
    throw InvalidParameter("mode must be exact or mc");
  }
  o.statistics["independence"] = summarize(report);
  o.require("kwise_independent", report.passed);
  return o;
}

Outcome run_pascal(const RunConfig& c) {
  if (c.rows < 0 || c.rows > 62) throw InvalidParameter("rows must lie in [0, 62]");
  Outcome o;
  o.construction = "pascal";
  o.params = {{"n", c.n}, {"rows", c.rows}, {"trials", c.trials}};
  const SeedStream root(c.seed);
  const auto st = central_statistics(c.n, c.trials, root.derive(1), c.jobs);
  json hist = json::array();
  for (const auto& [v, count] : st.histogram) hist.push_back({v, count});
  o.tables["central_histogram"] = hist;
  o.statistics["central"] = {{"mean", st.mean}, {"mean_se", st.mean_se}, {"variance", st.variance},
                             {"variance_se", st.variance_se}, {"expected_variance", st.expected_variance},
                             {"kurtosis", st.kurtosis}, {"sixth_moment_ratio", st.sixth}};
  o.require("central_mean_zero", st.mean_ok());
  o.require("central_variance_binomial", st.variance_ok());

  const auto grid = second_moment_grid(c.rows, c.trials, root.derive(2), c.jobs);
  const double z = bonferroni_z(3.0, grid.size());
  json rows = json::array();
  bool grid_ok = true;
  for (const auto& cell : grid) {
    rows.push_back({cell.n, cell.k, cell.second, cell.standard_error, cell.expected});
    grid_ok = grid_ok && cell.ok(z);
  }
  o.tables["second_moments"] = rows;
  o.statistics["second_moment_z"] = z;
  o.require("second_moments_binomial", grid_ok);

  const auto plus = grow_triangle(c.rows, SignSource([] { return Sign{1}; }));
  bool binomial_ok = true;
  for (std::int64_t n = 0; n <= c.rows; ++n) {
    for (std::int64_t k = 0; k <= n; ++k) binomial_ok = binomial_ok && plus.at(n, k) == binomial(n, k);
  }
  o.require("all_plus_binomial", binomial_ok);
  return o;
}

Outcome run_perc(const RunConfig& c) {
  if (c.samples < 1) throw InvalidParameter("samples must be positive");
  Outcome o;
  o.construction = "perc";
  o.params = {{"n", c.side}, {"k", c.k}, {"p", c.p}, {"samples", c.samples},
              {"tuples", c.tuples}, {"trials", c.trials}, {"alpha", c.alpha}};
  const SeedStream root(c.seed);
  { SeedStream probe(0); sample_conditioned(c.side, c.k, c.p, probe); }
  struct Sample {
    int crossings = 0;
    bool full = false;
    std::uint64_t restarts = 0;
  };
  std::vector<Sample> samples(c.samples);
  parallel_for(c.samples, c.jobs, [&](std::size_t t) {
    SeedStream s = root.derive(1, t);
    const auto cfg = sample_conditioned(c.side, c.k, c.p, s);
    samples[t] = {cfg.crossing_count(), full_box_crossing(cfg), cfg.restarts};
  });
  std::map<int, std::uint64_t> counts;
  std::uint64_t attempts = 0;
  bool odd = true, full = true;
  for (const auto& s : samples) {
    ++counts[s.crossings];
    attempts += 1 + s.restarts;
    odd = odd && s.crossings % 2 == 1;
    full = full && s.full;
  }
  json crossing_counts = json::object();
  for (const auto& [n, count] : counts) crossing_counts[std::to_string(n)] = count;
  o.statistics["crossing_counts"] = crossing_counts;
  o.statistics["acceptance_rate"] = static_cast<double>(c.samples) / static_cast<double>(attempts);
  o.require("odd_crossing_count", odd);
  o.require("full_box_crossing", full);

  BondTestConfig bt;
  bt.n = c.side;
  bt.k = c.k;
  bt.p = c.p;
  bt.num_tuples = c.tuples;
  bt.trials = c.trials;
  bt.alpha = c.alpha;
  bt.tuple_seed = root.derive(2).next_u64();
  bt.trial_seed = root.derive(3).next_u64();
  bt.jobs = c.jobs;
  const auto bonds = verify_bond_kwise(bt);
  double max_z = 0;
  for (const auto& m : bonds.marginals) max_z = std::max(max_z, std::abs(m.z));
  o.statistics["bond_tuples"] = summarize(bonds.tuples);
  o.statistics["bond_marginals"] = {{"bonds", bonds.marginals.size()}, {"max_abs_z", max_z},
                                    {"threshold", bonds.marginal_threshold}};
  o.require("bond_tuples_independent", bonds.tuples.passed);
  o.require("bond_marginals_equal_p", bonds.marginals_ok);

  // Reported only: crossing indicators of k boxes, then of all k+1.
  BondTestConfig probe = bt;
  probe.trials = std::min<std::size_t>(c.trials, 20000);
  o.statistics["indicator_probe_k"] = summarize(probe_crossing_indicators(probe, c.k));
  o.statistics["indicator_probe_all"] = summarize(probe_crossing_indicators(probe, c.k + 1));
  return o;
}

Outcome dispatch(const RunConfig& c) {
  if (c.subcommand == "gray") return run_gray(c);
  if (c.subcommand == "modm") return run_modm(c);
  if (c.subcommand == "m4") return run_m4(c);
  if (c.subcommand == "verify") return run_verify(c);
  if (c.subcommand == "pascal") return run_pascal(c);
  if (c.subcommand == "perc") return run_perc(c);
  throw InvalidParameter("unknown subcommand '" + c.subcommand + "'");
}

std::filesystem::path report_path(const RunConfig& c) { return c.output_dir / (c.subcommand + "_report.json"); }
std::filesystem::path csv_path(const RunConfig& c) { return c.output_dir / (c.subcommand + "_path.csv"); }

}  // namespace

std::vector<std::filesystem::path> artifact_paths(const RunConfig& config) {
  std::vector<std::filesystem::path> paths{report_path(config)};
  const bool has_walk = config.subcommand == "gray" || (config.emit_path && (config.subcommand == "modm" || config.subcommand == "m4"));
  if (has_walk && config.format == "csv") paths.push_back(csv_path(config));
  return paths;
}

int run(const RunConfig& config, std::ostream& log, std::ostream& err) {
  if (config.format != "csv" && config.format != "json") {
    err << "error: --format must be csv or json\n";
    return 2;
  }
  Outcome o;
  try {
    o = dispatch(config);
  } catch (const InvalidParameter& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const SearchExhausted& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const BudgetExceeded& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }

  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  if (o.path) {
    if (config.format == "csv") {
      write_csv(csv_path(config), *o.path);
    } else {
      o.tables["path"] = walk_rows(*o.path);
    }
  }
  json assertions = json::array();
  for (const auto& [name, ok] : o.assertions) assertions.push_back({{"name", name}, {"passed", ok}});
  const json report = {{"schema_version", kSchemaVersion},
                       {"construction", o.construction},
                       {"params", o.params},
                       {"seed", config.seed},
                       {"verdict", o.passed() ? "pass" : "fail"},
                       {"assertions", assertions},
                       {"tables", o.tables},
                       {"statistics", o.statistics}};
  const auto file = report_path(config);
  std::ofstream out(file, std::ios::binary);
  if (!out) {
    err << "error: cannot write " << file.string() << '\n';
    return 2;
  }
  out << report.dump(2) << '\n';
  out.close();

  for (const auto& [name, ok] : o.assertions) {
    if (!ok) err << "assertion failed: " << name << '\n';
  }
  log << config.subcommand << ": " << (o.passed() ? "pass" : "fail") << " (" << file.string() << ")\n";
  return o.passed() ? 0 : 1;
}

std::optional<RunConfig> parse_args(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                                    int& exit_code) {
  RunConfig c;
  std::string out_dir;
  CLI::App app{"k-wise independent random walks: constructions and verification"};
  app.require_subcommand(1);
  app.add_option("--seed", c.seed, "root seed; every random draw derives from it");
  app.add_option("--out", out_dir, "output directory (default $KWISE_OUTPUT_DIR or .)");
  app.add_option("--format", c.format, "walk table format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--jobs", c.jobs, "worker threads")->check(CLI::Range(1U, 256U));

  auto* gray = app.add_subcommand("gray", "pairwise independent gray walk");
  gray->add_option("--horizon", c.horizon);
  gray->add_option("--order", c.order)->check(CLI::IsMember({"gray", "lex"}));
  gray->add_flag("--emit-path", c.emit_path, "accepted for symmetry; gray always writes its path");

  auto* modm = app.add_subcommand("modm", "general mod m construction");
  modm->add_option("--k", c.k);
  modm->add_option("--m", c.m);
  modm->add_option("--eps", c.eps);
  modm->add_option("--lambda", c.lambda, "skip the search and use this lambda");
  modm->add_option("--trials", c.trials);
  modm->add_option("--checkpoints", c.checkpoints);
  modm->add_flag("--emit-path", c.emit_path);

  auto* m4 = app.add_subcommand("m4", "mod 4 block construction");
  m4->add_option("--k", c.k);
  m4->add_option("--L", c.L);
  m4->add_option("--horizon", c.horizon);
  m4->add_option("--trials", c.trials);
  m4->add_flag("--emit-path", c.emit_path);

  auto* verify = app.add_subcommand("verify", "k-wise independence check");
  verify->add_option("--construction", c.construction)->check(CLI::IsMember({"iid", "gray", "m4", "modm"}));
  verify->add_option("--k", c.k);
  verify->add_option("--mode", c.mode)->check(CLI::IsMember({"exact", "mc"}));
  verify->add_option("--L", c.L);
  verify->add_option("--J", c.J);
  verify->add_option("--m", c.m);
  verify->add_option("--eps", c.eps);
  verify->add_option("--lambda", c.lambda);
  verify->add_option("--tuples", c.tuples);
  verify->add_option("--trials", c.trials);
  verify->add_option("--alpha", c.alpha);

  auto* pascal = app.add_subcommand("pascal", "random-sign Pascal triangle");
  pascal->add_option("--n", c.n, "central coefficient X_{2n,n}");
  pascal->add_option("--rows", c.rows, "second moment grid up to this row");
  pascal->add_option("--trials", c.trials);

  auto* perc = app.add_subcommand("perc", "conditioned bond percolation");
  perc->add_option("--n", c.side);
  perc->add_option("--k", c.k);
  perc->add_option("--p", c.p);
  perc->add_option("--samples", c.samples);
  perc->add_option("--tuples", c.tuples);
  perc->add_option("--trials", c.trials);
  perc->add_option("--alpha", c.alpha);

  for (auto* sub : {gray, modm, m4, verify, pascal, perc}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    exit_code = app.exit(e, out, err);
    return std::nullopt;
  }
  c.subcommand = app.get_subcommands().front()->get_name();
  if (!out_dir.empty()) {
    c.output_dir = out_dir;
  } else if (const char* env = std::getenv("KWISE_OUTPUT_DIR"); env && *env) {
    c.output_dir = env;
  }
  return c;
}

}  // namespace kwise::cli
