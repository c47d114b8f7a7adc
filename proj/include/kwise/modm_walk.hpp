#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "kwise/core.hpp"
#include "kwise/independence_lab.hpp"

namespace kwise {

using BigCount = boost::multiprecision::cpp_int;

// ---------------------------------------------------------------------------
// m = 4 block construction

// Blocks of length L: the first L-1 entries are fresh seed draws and the last
// one is their product, so every block has an even number of -1 entries and
// sums to 0 mod 4. Requires L > k, 4 | L and L | horizon.
SignSequence build_m4_sequence(int k, std::int64_t L, std::int64_t horizon, SeedStream& stream);

// All seed configurations of `blocks` consecutive blocks: seed bit
// b*(L-1)+t drives entry t+1 of block b+1.
FiniteSeedGenerator m4_finite_generator(std::int64_t L, std::int64_t blocks);

// Exhaustive check that every set of at most k positions in the first
// `blocks` blocks is uniform.
IndependenceReport verify_m4_kwise_exact(int k, std::int64_t L, std::int64_t blocks = 2);

// ---------------------------------------------------------------------------
// Parameters of the general construction

struct ModmParams {
  int k = 1;
  int m_requested = 2;   // modulus asked for
  int m = 2;             // working modulus: m_requested, doubled when odd
  double epsilon = 0.1;
  double lambda = 1.0;
  std::int64_t N = 0;    // block length, 2 * ceil(lambda * m^2)
  std::int64_t L = 0;    // (k + 1) * N

  std::int64_t blocks_per_period() const noexcept { return k + 1; }
};

// Derives N and L from (k, m, epsilon, lambda); throws InvalidParameter for
// k < 1, m < 1, epsilon outside (0,1) or lambda <= 0.
ModmParams make_modm_params(int k, int m, double epsilon, double lambda);

// ---------------------------------------------------------------------------
// Block classification

// Number of v in {±1}^N with sum = r (mod m), for r = 0..m-1.
std::vector<BigCount> sum_mod_m_distribution(std::int64_t N, int m);

// G_j label (j even) or the trimmed set S.
struct BlockLabel {
  static constexpr int kTrimmed = -1;
  int value = kTrimmed;

  bool in_s() const noexcept { return value == kTrimmed; }
  static BlockLabel trimmed() noexcept { return {}; }
  static BlockLabel good(int residue) noexcept { return {residue}; }
  friend bool operator==(BlockLabel, BlockLabel) = default;
};

std::string to_string(BlockLabel label);

// Lexicographic order puts -1 before +1 with v_1 most significant; the code
// of v is the integer whose bit N-i is set iff v_i = +1, so codes sort
// lexicographically.
std::uint64_t block_code(std::span<const Sign> v);
std::vector<Sign> block_from_code(std::uint64_t code, std::int64_t N);

// Lazy classifier for blocks of length N: G_j holds the A lexicographically
// smallest vectors with sum = j (mod m), everything else is S. Membership is
// decided from the sum residue and the vector's rank inside its residue class,
// using a table of suffix counts, without materializing {±1}^N.
class BlockClassifier {
 public:
  static constexpr std::int64_t kMaxBlockLength = 4096;

  BlockClassifier(std::int64_t N, int m);

  std::int64_t N() const noexcept { return N_; }
  int m() const noexcept { return m_; }
  const BigCount& A() const noexcept { return A_; }
  const std::vector<BigCount>& residue_counts() const noexcept { return counts_; }
  // |S| = 2^N - (m/2) A.
  BigCount trimmed_size() const;
  // |S| / 2^N.
  double trimmed_probability() const;

  // Number of vectors with the same sum residue that are lexicographically smaller.
  BigCount lex_rank(std::span<const Sign> v) const;
  BlockLabel label(std::span<const Sign> v) const;

 private:
  // Vectors of length len with sum = r (mod m).
  const BigCount& suffix_count(std::int64_t len, std::int64_t r) const {
    return suffix_[static_cast<std::size_t>(len) * static_cast<std::size_t>(m_) + static_cast<std::size_t>(r)];
  }
  int residue_of(std::span<const Sign> v) const;

  std::int64_t N_;
  int m_;
  std::vector<BigCount> suffix_;
  std::vector<BigCount> counts_;
  std::vector<BigCount> excess_;  // counts_[j] - A for even j
  BigCount A_;
};

// The classification written out over all 2^N vectors (N <= 20), indexed by
// block_code.
struct BlockClassification {
  std::int64_t N = 0;
  int m = 0;
  BigCount A;
  std::vector<BlockLabel> labels;

  std::uint64_t trimmed_count() const;
};

inline constexpr std::int64_t kMaxMaterializedBlock = 20;

BlockClassification classify_blocks(std::int64_t N, int m);

// ---------------------------------------------------------------------------
// Lambda selection

struct LambdaSearchOptions {
  double lambda_min = 1.0;
  double lambda_max = 1024.0;  // grid is lambda_min * 2^i up to this value
  int exact_terms = 64;        // a_max: tail evaluated exactly for 2 <= a <= a_max
};

struct LambdaTrial {
  double lambda = 0.0;
  std::int64_t N = 0;
  double trimmed_probability = 0.0;
  double worst_ratio = 0.0;  // max over a of P(L^mu = aL) / (2^(-a-1) eps)
  bool accepted = false;
  std::string note;
};

struct LambdaChoice {
  ModmParams params;
  double trimmed_probability = 0.0;
  // P(L^mu = aL) for a = 2..a_max, entry a-2.
  std::vector<double> tail;
  // Geometric ratio bounding the tail beyond a_max (0 when S is empty).
  double ratio_bound = 0.0;
  std::vector<LambdaTrial> trials;
};

class SearchExhausted : public std::runtime_error {
 public:
  SearchExhausted(const std::string& what, std::vector<LambdaTrial> trials)
      : std::runtime_error(what), trials_(std::move(trials)) {}
  const std::vector<LambdaTrial>& trials() const noexcept { return trials_; }

 private:
  std::vector<LambdaTrial> trials_;
};

// Exact law of the stopping length: P(L^mu = aL) for a = 1..a_max, given the
// probability p that a block falls in S and the order k. Entry a-1.
std::vector<double> stopping_length_law(int k, double p, int a_max);

// Smallest lambda on the grid for which P(L^mu = aL) <= 2^(-a-1) eps holds for
// every a > 1, verified exactly up to a_max and by a geometric bound beyond.
LambdaChoice choose_lambda(int k, int m, double epsilon, const LambdaSearchOptions& options = {});

// ---------------------------------------------------------------------------
// Lemma sampler and assembly

struct LemmaSample {
  int mu = 0;
  std::int64_t L_mu = 0;
  std::vector<Sign> y_prefix;           // y_1..y_{L_mu}
  std::vector<BlockLabel> block_trace;  // labels of blocks 1..B
  std::int64_t B = 0;
  std::uint64_t restarts = 0;           // rejected attempts before acceptance
};

inline constexpr std::uint64_t kLemmaRestartBudget = 1000000;

class LemmaSampler {
 public:
  explicit LemmaSampler(const ModmParams& params);

  const ModmParams& params() const noexcept { return params_; }
  const BlockClassifier& classifier() const noexcept { return classifier_; }

  // Draws (L^mu, y_1..y_{L^mu}) by rejection: blocks are drawn until the
  // (k+1)-th block outside S, the attempt is kept iff the first B*N values
  // sum to mu (mod m), and positions B*N+1..L^mu are fresh draws.
  LemmaSample sample(int mu, SeedStream& stream) const;

  // First `length` values of Y^mu: the accepted prefix followed by i.i.d. draws.
  std::vector<Sign> sequence(int mu, SeedStream& stream, std::size_t length) const;

 private:
  ModmParams params_;
  BlockClassifier classifier_;
};

LemmaSample sample_lemma_pair(int mu, const ModmParams& params, SeedStream& stream);

struct AssemblyStep {
  std::int64_t rho = 0;  // values emitted before this step
  int mu = 0;
  std::int64_t L_mu = 0;
};

struct AssembledSequence {
  SignSequence sequence;                 // X_1..X_horizon
  std::vector<std::int64_t> checkpoints; // I_j = jL, j = 1..horizon/L
  std::vector<AssemblyStep> steps;
};

// Concatenates lemma samples, choosing mu = -S_rho (mod m) at each step and
// drawing step nu from the substream seed.derive(nu, mu). horizon must be a
// positive multiple of L.
AssembledSequence assemble_sequence(const LemmaSampler& sampler, std::int64_t horizon, const SeedStream& seed);
AssembledSequence assemble_sequence(const ModmParams& params, std::int64_t horizon, const SeedStream& seed);

// Checks each tuple has at most k distinct indices, then runs the chi-square
// battery on realizations from the factory.
IndependenceReport verify_kwise(const SequenceFactory& factory, int k, std::span<const IndexTuple> tuples,
                                const ChiSquareConfig& config, std::string subject = {});

// Realizations of the general construction, truncated to the requested length.
SequenceFactory modm_factory(std::shared_ptr<const LemmaSampler> sampler);
SequenceFactory m4_factory(int k, std::int64_t L);

}  // namespace kwise
