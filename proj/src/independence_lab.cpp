#include "kwise/independence_lab.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <limits>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "kwise/parallel.hpp"

namespace kwise {

namespace {

constexpr std::size_t kMaxRecordedViolations = 100;
constexpr std::uint64_t kMaxPackedBytes = std::uint64_t{1} << 28;

void check_tuple(std::span<const std::int64_t> indices, std::size_t length) {
  if (indices.empty()) throw InvalidParameter("empty index tuple");
  for (std::size_t a = 0; a < indices.size(); ++a) {
    if (indices[a] < 1 || static_cast<std::size_t>(indices[a]) > length) {
      throw InvalidParameter("index " + std::to_string(indices[a]) + " outside 1.." + std::to_string(length));
    }
    for (std::size_t b = 0; b < a; ++b) {
      if (indices[a] == indices[b]) throw InvalidParameter("repeated index in tuple");
    }
  }
  if (indices.size() > 20) throw InvalidParameter("tuple too long for a joint table");
}

void record(IndependenceReport& report, Violation v) {
  report.passed = false;
  ++report.violation_count;
  if (report.violations.size() < kMaxRecordedViolations) report.violations.push_back(std::move(v));
}

Violation exact_violation(const JointTable& table) {
  Violation v;
  v.indices = table.indices;
  v.observed = table.counts;
  v.expected = product_law_counts(static_cast<int>(table.indices.size()), 0.5, table.total);
  v.statistic = chi_square_statistic(v.observed, v.expected);
  v.p_value = 0.0;
  return v;
}

}  // namespace

std::string_view to_string(TestMode mode) noexcept { return mode == TestMode::Exact ? "exact" : "monte_carlo"; }

FiniteSeedGenerator iid_finite_generator(unsigned seed_bits) {
  FiniteSeedGenerator gen;
  gen.name = "iid";
  gen.seed_bits = seed_bits;
  gen.length = seed_bits;
  gen.generate = [](std::uint64_t seed, std::span<Sign> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = ((seed >> i) & 1U) ? Sign{-1} : Sign{1};
  };
  return gen;
}

JointTable exact_joint(const FiniteSeedGenerator& gen, std::span<const std::int64_t> indices) {
  if (gen.seed_bits > kMaxExactSeedBits) {
    throw BudgetExceeded("seed space of 2^" + std::to_string(gen.seed_bits) +
                         " exceeds the exact budget; use Monte Carlo mode");
  }
  check_tuple(indices, gen.length);
  JointTable table;
  table.indices.assign(indices.begin(), indices.end());
  table.counts.assign(std::size_t{1} << indices.size(), 0);
  std::vector<Sign> buffer(gen.length);
  const std::uint64_t seeds = std::uint64_t{1} << gen.seed_bits;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    gen.generate(s, buffer);
    std::size_t cell = 0;
    for (std::size_t t = 0; t < indices.size(); ++t) {
      if (buffer[static_cast<std::size_t>(indices[t] - 1)] == -1) cell |= std::size_t{1} << t;
    }
    ++table.counts[cell];
  }
  table.total = seeds;
  return table;
}

PackedSeedTable::PackedSeedTable(const FiniteSeedGenerator& gen)
    : seed_bits_(gen.seed_bits), length_(gen.length) {
  if (seed_bits_ > kMaxExactSeedBits) {
    throw BudgetExceeded("seed space of 2^" + std::to_string(seed_bits_) +
                         " exceeds the exact budget; use Monte Carlo mode");
  }
  const std::uint64_t seeds = seed_count();
  words_ = static_cast<std::size_t>((seeds + 63) / 64);
  if (static_cast<std::uint64_t>(length_) * words_ * 8 > kMaxPackedBytes) {
    throw BudgetExceeded("packed seed table for " + std::to_string(length_) + " positions over 2^" +
                         std::to_string(seed_bits_) + " seeds exceeds the memory budget");
  }
  bits_.assign(length_ * words_, 0);
  std::vector<Sign> buffer(length_);
  for (std::uint64_t s = 0; s < seeds; ++s) {
    gen.generate(s, buffer);
    const std::size_t word = static_cast<std::size_t>(s / 64);
    const std::uint64_t bit = std::uint64_t{1} << (s % 64);
    for (std::size_t i = 0; i < length_; ++i) {
      if (buffer[i] == -1) bits_[i * words_ + word] |= bit;
    }
  }
}

std::span<const std::uint64_t> PackedSeedTable::column(std::int64_t index) const {
  return {bits_.data() + static_cast<std::size_t>(index - 1) * words_, words_};
}

std::uint64_t PackedSeedTable::odd_count(std::span<const std::int64_t> indices) const {
  check_tuple(indices, length_);
  std::uint64_t total = 0;
  for (std::size_t w = 0; w < words_; ++w) {
    std::uint64_t acc = 0;
    for (const auto i : indices) acc ^= column(i)[w];
    total += static_cast<std::uint64_t>(std::popcount(acc));
  }
  return total;
}

bool PackedSeedTable::tuple_uniform(std::span<const std::int64_t> indices) const {
  check_tuple(indices, length_);
  const std::size_t subsets = std::size_t{1} << indices.size();
  std::vector<std::int64_t> sub;
  for (std::size_t mask = 1; mask < subsets; ++mask) {
    sub.clear();
    for (std::size_t t = 0; t < indices.size(); ++t) {
      if (mask & (std::size_t{1} << t)) sub.push_back(indices[t]);
    }
    if (!balanced(sub)) return false;
  }
  return true;
}

JointTable PackedSeedTable::joint(std::span<const std::int64_t> indices) const {
  check_tuple(indices, length_);
  JointTable table;
  table.indices.assign(indices.begin(), indices.end());
  table.counts.assign(std::size_t{1} << indices.size(), 0);
  table.total = seed_count();
  const std::uint64_t tail_mask = (seed_count() % 64 == 0) ? ~std::uint64_t{0}
                                                           : ((std::uint64_t{1} << (seed_count() % 64)) - 1);
  for (std::size_t cell = 0; cell < table.counts.size(); ++cell) {
    std::uint64_t count = 0;
    for (std::size_t w = 0; w < words_; ++w) {
      std::uint64_t acc = (w + 1 == words_) ? tail_mask : ~std::uint64_t{0};
      for (std::size_t t = 0; t < indices.size(); ++t) {
        const std::uint64_t col = column(indices[t])[w];
        acc &= (cell & (std::size_t{1} << t)) ? col : ~col;
      }
      count += static_cast<std::uint64_t>(std::popcount(acc));
    }
    table.counts[cell] = count;
  }
  return table;
}

IndependenceReport exact_tuples(const PackedSeedTable& table, std::span<const IndexTuple> tuples,
                                std::string subject) {
  IndependenceReport report;
  report.mode = TestMode::Exact;
  report.subject = std::move(subject);
  report.sample_size = table.seed_count();
  for (const auto& tuple : tuples) {
    ++report.tuples_tested;
    if (table.tuple_uniform(tuple)) continue;
    auto v = exact_violation(table.joint(tuple));
    report.max_statistic = std::max(report.max_statistic, v.statistic);
    record(report, std::move(v));
  }
  if (!report.passed) report.min_p_value = 0.0;
  return report;
}

IndependenceReport exact_kwise(const PackedSeedTable& table, int k, std::int64_t first, std::int64_t last,
                               std::string subject) {
  if (k < 1) throw InvalidParameter("exact_kwise: k must be positive");
  if (first < 1 || last < first || static_cast<std::size_t>(last) > table.length()) {
    throw InvalidParameter("exact_kwise: index window outside the generated prefix");
  }
  IndependenceReport report;
  report.mode = TestMode::Exact;
  report.subject = std::move(subject);
  report.sample_size = table.seed_count();

  const std::int64_t count = last - first + 1;
  const std::size_t depth_max = static_cast<std::size_t>(std::min<std::int64_t>(k, count));
  const std::uint64_t half = table.seed_count() / 2;
  const std::size_t words = table.words();

  // Depth-first over subsets in increasing index order; level d holds the
  // XOR of the d chosen columns.
  std::vector<std::vector<std::uint64_t>> level(depth_max + 1, std::vector<std::uint64_t>(words, 0));
  IndexTuple chosen;
  chosen.reserve(depth_max);

  auto visit = [&](auto&& self, std::int64_t next) -> void {
    const std::size_t depth = chosen.size();
    for (std::int64_t i = next; i <= last; ++i) {
      const auto col = table.column(i);
      auto& acc = level[depth + 1];
      std::uint64_t odd = 0;
      for (std::size_t w = 0; w < words; ++w) {
        acc[w] = level[depth][w] ^ col[w];
        odd += static_cast<std::uint64_t>(std::popcount(acc[w]));
      }
      chosen.push_back(i);
      if (chosen.size() == depth_max) ++report.tuples_tested;
      if (odd != half) {
        auto v = exact_violation(table.joint(chosen));
        report.max_statistic = std::max(report.max_statistic, v.statistic);
        record(report, std::move(v));
      }
      if (chosen.size() < depth_max) self(self, i + 1);
      chosen.pop_back();
    }
  };
  visit(visit, first);
  if (!report.passed) report.min_p_value = 0.0;
  return report;
}

BinarySampler as_binary(SequenceFactory factory) {
  return [factory = std::move(factory)](SeedStream& stream, std::size_t length) {
    const auto signs = factory(stream, length);
    std::vector<std::uint8_t> bits(signs.size());
    for (std::size_t i = 0; i < signs.size(); ++i) bits[i] = signs[i] == -1 ? 1 : 0;
    return bits;
  };
}

std::vector<IndexTuple> random_tuples(int k, std::size_t count, std::int64_t first, std::int64_t last,
                                      std::uint64_t tuple_seed) {
  if (k < 1) throw InvalidParameter("random_tuples: k must be positive");
  if (first < 1 || last - first + 1 < k) throw InvalidParameter("random_tuples: window smaller than k");
  SeedStream stream(tuple_seed);
  const auto width = static_cast<std::uint64_t>(last - first + 1);
  std::vector<IndexTuple> tuples;
  tuples.reserve(count);
  while (tuples.size() < count) {
    IndexTuple t;
    while (t.size() < static_cast<std::size_t>(k)) {
      const auto candidate = first + static_cast<std::int64_t>(stream.below(width));
      if (std::find(t.begin(), t.end(), candidate) == t.end()) t.push_back(candidate);
    }
    std::sort(t.begin(), t.end());
    tuples.push_back(std::move(t));
  }
  return tuples;
}

std::vector<JointTable> sample_joint_tables(const BinarySampler& sampler, std::span<const IndexTuple> tuples,
                                            std::size_t trials, std::uint64_t trial_seed, unsigned jobs) {
  std::int64_t max_index = 0;
  for (const auto& t : tuples) {
    check_tuple(t, std::numeric_limits<std::size_t>::max());
    max_index = std::max(max_index, *std::max_element(t.begin(), t.end()));
  }
  const auto length = static_cast<std::size_t>(max_index);

  // Per-chunk tallies merged in chunk order.
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(trials, 64));
  std::vector<std::vector<std::vector<std::uint64_t>>> partial(chunks);
  const SeedStream root(trial_seed);
  parallel_for(chunks, jobs, [&](std::size_t c) {
    auto& counts = partial[c];
    counts.resize(tuples.size());
    for (std::size_t t = 0; t < tuples.size(); ++t) counts[t].assign(std::size_t{1} << tuples[t].size(), 0);
    const std::size_t begin = trials * c / chunks;
    const std::size_t end = trials * (c + 1) / chunks;
    for (std::size_t trial = begin; trial < end; ++trial) {
      SeedStream stream = root.derive(trial);
      const auto bits = sampler(stream, length);
      if (bits.size() < length) throw InvalidParameter("sampler returned a short realization");
      for (std::size_t t = 0; t < tuples.size(); ++t) {
        std::size_t cell = 0;
        for (std::size_t a = 0; a < tuples[t].size(); ++a) {
          if (bits[static_cast<std::size_t>(tuples[t][a] - 1)]) cell |= std::size_t{1} << a;
        }
        ++counts[t][cell];
      }
    }
  });

  std::vector<JointTable> tables(tuples.size());
  for (std::size_t t = 0; t < tuples.size(); ++t) {
    tables[t].indices = tuples[t];
    tables[t].counts.assign(std::size_t{1} << tuples[t].size(), 0);
    tables[t].total = trials;
    for (const auto& chunk : partial) {
      for (std::size_t cell = 0; cell < chunk[t].size(); ++cell) tables[t].counts[cell] += chunk[t][cell];
    }
  }
  return tables;
}

double chi_square_statistic(std::span<const std::uint64_t> observed, std::span<const double> expected) {
  if (observed.size() != expected.size()) throw InvalidParameter("chi-square: table size mismatch");
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double o = static_cast<double>(observed[i]);
    if (expected[i] <= 0.0) {
      if (o > 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    const double d = o - expected[i];
    stat += d * d / expected[i];
  }
  return stat;
}

double chi_square_upper_tail(double statistic, double dof) {
  if (!std::isfinite(statistic)) return 0.0;
  if (statistic <= 0.0) return 1.0;
  const boost::math::chi_squared_distribution<double> dist(dof);
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

double bonferroni_z(double z, std::size_t count) {
  if (count <= 1) return z;
  const boost::math::normal_distribution<double> normal;
  const double family = 2.0 * boost::math::cdf(boost::math::complement(normal, z));
  const double per_test = family / static_cast<double>(count);
  return std::max(z, boost::math::quantile(boost::math::complement(normal, per_test / 2.0)));
}

std::vector<double> product_law_counts(int k, double q, std::uint64_t total) {
  const std::size_t cells = std::size_t{1} << k;
  std::vector<double> expected(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    const int ones = std::popcount(c);
    expected[c] = static_cast<double>(total) * std::pow(q, ones) * std::pow(1.0 - q, k - ones);
  }
  return expected;
}

IndependenceReport chi_square_tuples(const BinarySampler& sampler, std::span<const IndexTuple> tuples,
                                     const ChiSquareConfig& config, std::string subject) {
  if (tuples.empty()) throw InvalidParameter("chi_square_tuples: no tuples");
  std::size_t widest = 0;
  for (const auto& t : tuples) widest = std::max(widest, t.size());
  if (config.trials < 100 * (std::size_t{1} << widest)) {
    throw InvalidParameter("chi_square_tuples: need at least 100 * 2^k trials, got " +
                           std::to_string(config.trials));
  }
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw InvalidParameter("chi_square_tuples: alpha outside (0,1)");
  if (!(config.one_probability > 0.0 && config.one_probability < 1.0)) {
    throw InvalidParameter("chi_square_tuples: marginal probability outside (0,1)");
  }

  IndependenceReport report;
  report.mode = TestMode::MonteCarlo;
  report.subject = std::move(subject);
  report.sample_size = config.trials;
  report.alpha = config.alpha;
  report.tuples_tested = tuples.size();

  const auto tables = sample_joint_tables(sampler, tuples, config.trials, config.trial_seed, config.jobs);
  const double per_test = config.alpha / static_cast<double>(tuples.size());
  for (const auto& table : tables) {
    const int k = static_cast<int>(table.indices.size());
    Violation v;
    v.indices = table.indices;
    v.observed = table.counts;
    v.expected = product_law_counts(k, config.one_probability, table.total);
    v.statistic = chi_square_statistic(v.observed, v.expected);
    v.p_value = chi_square_upper_tail(v.statistic, static_cast<double>((std::size_t{1} << k) - 1));
    report.max_statistic = std::max(report.max_statistic, v.statistic);
    report.min_p_value = std::min(report.min_p_value, v.p_value);
    if (v.p_value < per_test) record(report, std::move(v));
  }
  return report;
}

IndependenceReport chi_square_tuples(const BinarySampler& sampler, const ChiSquareConfig& config,
                                     std::string subject) {
  const auto tuples =
      random_tuples(config.k, config.num_tuples, config.window_first, config.window_last, config.tuple_seed);
  return chi_square_tuples(sampler, tuples, config, std::move(subject));
}

namespace {

// Mean of f over the samples with its delete-one jackknife standard error.
template <typename F>
MomentEstimate jackknife_mean(std::span<const std::int64_t> xs, F f) {
  const double n = static_cast<double>(xs.size());
  double total = 0.0;
  for (const auto x : xs) total += f(static_cast<double>(x));
  MomentEstimate est;
  est.value = total / n;
  // Leave-one-out means theta_i = (total - f_i) / (n - 1); their average is
  // the full mean, so the jackknife variance is (n-1)/n * sum (theta_i - mean)^2.
  double ss = 0.0;
  for (const auto x : xs) {
    const double theta = (total - f(static_cast<double>(x))) / (n - 1.0);
    ss += (theta - est.value) * (theta - est.value);
  }
  est.standard_error = std::sqrt((n - 1.0) / n * ss);
  return est;
}

bool within(const MomentEstimate& e, double expected, double z) {
  return std::abs(e.value - expected) <= z * e.standard_error;
}

}  // namespace

bool MomentReport::mean_ok(double z) const noexcept { return within(mean, 0.0, z); }
bool MomentReport::second_ok(double z) const noexcept { return within(second, expected_second(), z); }
bool MomentReport::fourth_ok(double z) const noexcept { return within(fourth, expected_fourth(), z); }

MomentReport moment_report(std::span<const std::int64_t> walk_values, std::int64_t n) {
  if (walk_values.size() < kMinMomentSamples) {
    throw InvalidParameter("moment_report: need at least " + std::to_string(kMinMomentSamples) + " samples");
  }
  if (n < 1) throw InvalidParameter("moment_report: n must be positive");
  MomentReport r;
  r.n = n;
  r.samples = walk_values.size();
  r.mean = jackknife_mean(walk_values, [](double x) { return x; });
  r.second = jackknife_mean(walk_values, [](double x) { return x * x; });
  r.fourth = jackknife_mean(walk_values, [](double x) { return x * x * x * x; });
  return r;
}

double fourth_moment_tail_bound(std::int64_t n, double M) {
  const double d = static_cast<double>(n);
  const double gap = d - M;
  return gap * gap / (3.0 * d * d - 2.0 * d);
}

TailCheck tail_bound_check(std::span<const std::int64_t> walk_values, std::int64_t n, double M) {
  if (n < 1) throw InvalidParameter("tail_bound_check: n must be positive");
  if (!(M < static_cast<double>(n))) throw InvalidParameter("tail_bound_check: need M < n");
  if (walk_values.empty()) throw InvalidParameter("tail_bound_check: no samples");
  std::size_t above = 0;
  for (const auto s : walk_values) {
    if (static_cast<double>(s) * static_cast<double>(s) > M) ++above;
  }
  TailCheck check;
  const double count = static_cast<double>(walk_values.size());
  check.empirical = static_cast<double>(above) / count;
  check.standard_error = std::sqrt(check.empirical * (1.0 - check.empirical) / count);
  check.lower_bound = fourth_moment_tail_bound(n, M);
  check.passed = check.empirical >= check.lower_bound - 3.0 * check.standard_error;
  return check;
}

}  // namespace kwise
