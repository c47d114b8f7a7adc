#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kwise/core.hpp"

namespace kwise {

using IndexTuple = std::vector<std::int64_t>;  // 1-based positions

enum class TestMode { Exact, MonteCarlo };

std::string_view to_string(TestMode mode) noexcept;

// Joint distribution of a tuple of binary variables. Cell c counts outcomes in
// which coordinate t is "one" (a −1 sign, or an open bond) iff bit t of c is set.
struct JointTable {
  IndexTuple indices;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;
};

struct Violation {
  IndexTuple indices;
  std::vector<std::uint64_t> observed;
  std::vector<double> expected;
  double statistic = 0.0;  // Pearson chi-square of observed against expected
  double p_value = 0.0;    // 0 in exact mode
};

struct IndependenceReport {
  TestMode mode = TestMode::Exact;
  std::string subject;
  std::size_t tuples_tested = 0;
  std::uint64_t sample_size = 0;  // trials, or seed-space size in exact mode
  double alpha = 0.0;             // family-wise level; unused in exact mode
  double max_statistic = 0.0;
  double min_p_value = 1.0;
  std::vector<Violation> violations;  // the first 100 recorded
  std::size_t violation_count = 0;
  bool passed = true;
};

// ---------------------------------------------------------------------------
// Exact mode

inline constexpr unsigned kMaxExactSeedBits = 22;

// Deterministic map from a seed index in [0, 2^seed_bits) to X_1..X_length.
struct FiniteSeedGenerator {
  std::string name;
  unsigned seed_bits = 0;
  std::size_t length = 0;
  std::function<void(std::uint64_t seed, std::span<Sign> out)> generate;
};

// I.i.d. signs: X_i is bit i-1 of the seed.
FiniteSeedGenerator iid_finite_generator(unsigned seed_bits);

// Exhaustive joint table at the given positions over the whole seed space.
// Throws BudgetExceeded when the seed space exceeds 2^kMaxExactSeedBits.
JointTable exact_joint(const FiniteSeedGenerator& gen, std::span<const std::int64_t> indices);

// The generator's outputs packed column-wise: column i holds one bit per seed,
// set when X_{i+1} = −1. Uniformity of a tuple is decided through the Walsh
// characters: a tuple is uniform iff the product over every nonempty
// sub-tuple has mean zero.
class PackedSeedTable {
 public:
  explicit PackedSeedTable(const FiniteSeedGenerator& gen);

  unsigned seed_bits() const noexcept { return seed_bits_; }
  std::size_t length() const noexcept { return length_; }
  std::uint64_t seed_count() const noexcept { return std::uint64_t{1} << seed_bits_; }

  // Number of seeds for which the product of X over `indices` is −1.
  std::uint64_t odd_count(std::span<const std::int64_t> indices) const;
  // True iff E[prod X_i] = 0 over the seed space.
  bool balanced(std::span<const std::int64_t> indices) const { return 2 * odd_count(indices) == seed_count(); }
  bool tuple_uniform(std::span<const std::int64_t> indices) const;
  JointTable joint(std::span<const std::int64_t> indices) const;

  std::size_t words() const noexcept { return words_; }
  // Packed column of X_index (1-based).
  std::span<const std::uint64_t> column(std::int64_t index) const;

 private:
  unsigned seed_bits_;
  std::size_t length_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
};

IndependenceReport exact_tuples(const PackedSeedTable& table, std::span<const IndexTuple> tuples,
                                std::string subject = {});

// Every set of at most k positions inside [first, last] is checked.
IndependenceReport exact_kwise(const PackedSeedTable& table, int k, std::int64_t first, std::int64_t last,
                               std::string subject = {});

// ---------------------------------------------------------------------------
// Monte Carlo mode

// Produces one realization of a binary family (1 = "one" outcome) of at least
// `length` coordinates from a dedicated substream.
using BinarySampler = std::function<std::vector<std::uint8_t>(SeedStream& stream, std::size_t length)>;
// Produces one ±1 realization X_1..X_length.
using SequenceFactory = std::function<std::vector<Sign>(SeedStream& stream, std::size_t length)>;

BinarySampler as_binary(SequenceFactory factory);

struct ChiSquareConfig {
  int k = 2;
  std::size_t num_tuples = 100;
  std::size_t trials = 100000;
  double alpha = 0.01;
  std::uint64_t tuple_seed = 1;
  std::uint64_t trial_seed = 1;
  std::int64_t window_first = 1;
  std::int64_t window_last = 64;
  // Probability of the "one" outcome in every coordinate under the null.
  double one_probability = 0.5;
  unsigned jobs = 1;
};

// k distinct sorted positions drawn uniformly from the window, per tuple.
std::vector<IndexTuple> random_tuples(int k, std::size_t count, std::int64_t first, std::int64_t last,
                                      std::uint64_t tuple_seed);

// Pearson chi-square of every tuple's joint table against the product law,
// 2^k − 1 degrees of freedom, Bonferroni-corrected across tuples.
IndependenceReport chi_square_tuples(const BinarySampler& sampler, std::span<const IndexTuple> tuples,
                                     const ChiSquareConfig& config, std::string subject = {});
// Same, with config.num_tuples tuples drawn by random_tuples.
IndependenceReport chi_square_tuples(const BinarySampler& sampler, const ChiSquareConfig& config,
                                     std::string subject = {});

// Monte Carlo joint tables for the given tuples; shared by chi_square_tuples
// and callers that need the raw counts.
std::vector<JointTable> sample_joint_tables(const BinarySampler& sampler, std::span<const IndexTuple> tuples,
                                            std::size_t trials, std::uint64_t trial_seed, unsigned jobs);

double chi_square_statistic(std::span<const std::uint64_t> observed, std::span<const double> expected);
// Upper tail P(chi2_df > statistic).
double chi_square_upper_tail(double statistic, double dof);
// Expected cell counts of k independent coordinates with P(one) = q.
std::vector<double> product_law_counts(int k, double q, std::uint64_t total);

// Two-sided normal threshold that keeps the family-wise error of `count`
// z-tests at the level of a single |Z| <= z test (never below z).
double bonferroni_z(double z, std::size_t count);

// ---------------------------------------------------------------------------
// Moments and tail bound

struct MomentEstimate {
  double value = 0.0;
  double standard_error = 0.0;  // jackknife
};

struct MomentReport {
  std::int64_t n = 0;
  std::size_t samples = 0;
  MomentEstimate mean;
  MomentEstimate second;
  MomentEstimate fourth;

  double expected_second() const noexcept { return static_cast<double>(n); }
  double expected_fourth() const noexcept {
    const double d = static_cast<double>(n);
    return 3.0 * d * d - 2.0 * d;
  }
  // Each of E S_n = 0, E S_n^2 = n and E S_n^4 = 3n^2 - 2n within z standard errors.
  bool mean_ok(double z = 3.0) const noexcept;
  bool second_ok(double z = 3.0) const noexcept;
  bool fourth_ok(double z = 3.0) const noexcept;
};

inline constexpr std::size_t kMinMomentSamples = 1000;

MomentReport moment_report(std::span<const std::int64_t> walk_values, std::int64_t n);

struct TailCheck {
  double empirical = 0.0;       // P(S_n^2 > M)
  double standard_error = 0.0;  // binomial
  double lower_bound = 0.0;     // (n - M)^2 / (3n^2 - 2n)
  bool passed = false;          // empirical >= lower_bound - 3 standard errors
};

// Uses the second and fourth moments of a (>= 4)-wise independent walk.
TailCheck tail_bound_check(std::span<const std::int64_t> walk_values, std::int64_t n, double M);

// (n - M)^2 / (3n^2 - 2n), the fourth-moment lower bound on P(S_n^2 > M).
double fourth_moment_tail_bound(std::int64_t n, double M);

}  // namespace kwise
