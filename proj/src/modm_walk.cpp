#include "kwise/modm_walk.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace kwise {

namespace {

using BigFloat = boost::multiprecision::cpp_bin_float_50;

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::int64_t sum_of(std::span<const Sign> v) {
  std::int64_t s = 0;
  for (const Sign x : v) s += x;
  return s;
}

// suffix[len * m + r] = #{v in {±1}^len : sum v = r (mod m)}, len = 0..N.
std::vector<BigCount> residue_table(std::int64_t N, int m) {
  const auto width = static_cast<std::size_t>(m);
  std::vector<BigCount> table((static_cast<std::size_t>(N) + 1) * width);
  table[0] = 1;
  for (std::int64_t len = 1; len <= N; ++len) {
    const std::size_t prev = static_cast<std::size_t>(len - 1) * width;
    const std::size_t cur = static_cast<std::size_t>(len) * width;
    for (int r = 0; r < m; ++r) {
      // Last entry +1 leaves residue r-1 for the rest, -1 leaves r+1.
      const auto down = static_cast<std::size_t>(mod_floor(r - 1, m));
      const auto up = static_cast<std::size_t>(mod_floor(r + 1, m));
      table[cur + static_cast<std::size_t>(r)] = table[prev + down];
      if (up != down) table[cur + static_cast<std::size_t>(r)] += table[prev + up];
      else table[cur + static_cast<std::size_t>(r)] *= 2;
    }
  }
  return table;
}

BigCount trimmed_from_counts(const std::vector<BigCount>& counts, std::int64_t N, int m) {
  BigCount A = counts[0];
  for (int j = 2; j < m; j += 2) A = std::min(A, counts[static_cast<std::size_t>(j)]);
  return (BigCount(1) << static_cast<unsigned>(N)) - A * (m / 2);
}

BigFloat binomial(std::int64_t n, std::int64_t r) {
  if (r < 0 || r > n) return 0;
  BigFloat c = 1;
  for (std::int64_t t = 1; t <= r; ++t) c = c * static_cast<double>(n - r + t) / static_cast<double>(t);
  return c;
}

// P(L^mu = aL), a = 1..a_max: B is the (k+1)-th success of Bernoulli(1-p)
// trials, so P(B = b) = C(b-1, k) (1-p)^(k+1) p^(b-k-1).
std::vector<BigFloat> stopping_law(int k, const BigFloat& p, int a_max) {
  const std::int64_t K = k + 1;
  const BigFloat q = 1 - p;
  const BigFloat qK = pow(q, static_cast<int>(K));
  std::vector<BigFloat> law(static_cast<std::size_t>(a_max), BigFloat(0));
  for (int a = 1; a <= a_max; ++a) {
    BigFloat total = 0;
    for (std::int64_t b = std::max<std::int64_t>(K, (a - 1) * K + 1); b <= a * K; ++b) {
      const std::int64_t extra = b - K;
      if (extra > 0 && p == 0) continue;
      total += binomial(b - 1, k) * qK * (extra == 0 ? BigFloat(1) : pow(p, static_cast<int>(extra)));
    }
    law[static_cast<std::size_t>(a - 1)] = total;
  }
  return law;
}

}  // namespace

// ---------------------------------------------------------------------------
// m = 4

SignSequence build_m4_sequence(int k, std::int64_t L, std::int64_t horizon, SeedStream& stream) {
  if (k < 1) throw InvalidParameter("m4: k must be positive");
  if (L <= k) throw InvalidParameter("m4: need L > k");
  if (L % 4 != 0) throw InvalidParameter("m4: L must be divisible by 4");
  if (horizon <= 0 || horizon % L != 0) throw InvalidParameter("m4: horizon must be a positive multiple of L");

  SignSequence seq;
  seq.construction = Construction::M4Block;
  seq.params.k = k;
  seq.params.m = 4;
  seq.params.L = L;
  seq.values.reserve(static_cast<std::size_t>(horizon));
  for (std::int64_t block = 0; block < horizon / L; ++block) {
    Sign product = 1;
    for (std::int64_t t = 0; t + 1 < L; ++t) {
      const Sign x = stream.next_sign();
      product = static_cast<Sign>(product * x);
      seq.values.push_back(x);
    }
    seq.values.push_back(product);
  }
  return seq;
}

FiniteSeedGenerator m4_finite_generator(std::int64_t L, std::int64_t blocks) {
  if (L < 2 || blocks < 1) throw InvalidParameter("m4 generator: need L >= 2 and at least one block");
  FiniteSeedGenerator gen;
  gen.name = "m4";
  gen.seed_bits = static_cast<unsigned>(blocks * (L - 1));
  gen.length = static_cast<std::size_t>(blocks * L);
  gen.generate = [L, blocks](std::uint64_t seed, std::span<Sign> out) {
    unsigned bit = 0;
    for (std::int64_t b = 0; b < blocks; ++b) {
      Sign product = 1;
      for (std::int64_t t = 0; t + 1 < L; ++t, ++bit) {
        const Sign x = ((seed >> bit) & 1U) ? Sign{-1} : Sign{1};
        product = static_cast<Sign>(product * x);
        out[static_cast<std::size_t>(b * L + t)] = x;
      }
      out[static_cast<std::size_t>(b * L + L - 1)] = product;
    }
  };
  return gen;
}

IndependenceReport verify_m4_kwise_exact(int k, std::int64_t L, std::int64_t blocks) {
  const PackedSeedTable table(m4_finite_generator(L, blocks));
  return exact_kwise(table, k, 1, blocks * L,
                     "m4 blocks, L=" + std::to_string(L) + ", " + std::to_string(k) + "-wise");
}

// ---------------------------------------------------------------------------
// Parameters

ModmParams make_modm_params(int k, int m, double epsilon, double lambda) {
  if (k < 1) throw InvalidParameter("k must be at least 1");
  if (m < 1) throw InvalidParameter("m must be at least 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidParameter("epsilon must lie in (0,1)");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidParameter("lambda must be positive");
  ModmParams p;
  p.k = k;
  p.m_requested = m;
  p.m = (m % 2 == 0) ? m : 2 * m;
  p.epsilon = epsilon;
  p.lambda = lambda;
  const double scaled = std::ceil(lambda * static_cast<double>(p.m) * static_cast<double>(p.m));
  if (scaled > 1e12) throw InvalidParameter("lambda * m^2 too large");
  p.N = 2 * static_cast<std::int64_t>(scaled);
  p.L = (k + 1) * p.N;
  return p;
}

// ---------------------------------------------------------------------------
// Classification

std::vector<BigCount> sum_mod_m_distribution(std::int64_t N, int m) {
  if (N < 1) throw InvalidParameter("sum_mod_m_distribution: N must be positive");
  if (m < 2) throw InvalidParameter("sum_mod_m_distribution: m must be at least 2");
  std::vector<BigCount> row(static_cast<std::size_t>(m)), next(static_cast<std::size_t>(m));
  row[0] = 1;
  for (std::int64_t len = 1; len <= N; ++len) {
    for (int r = 0; r < m; ++r) {
      const auto down = static_cast<std::size_t>(mod_floor(r - 1, m));
      const auto up = static_cast<std::size_t>(mod_floor(r + 1, m));
      next[static_cast<std::size_t>(r)] = row[down];
      if (up != down) next[static_cast<std::size_t>(r)] += row[up];
      else next[static_cast<std::size_t>(r)] *= 2;
    }
    row.swap(next);
  }
  return row;
}

std::string to_string(BlockLabel label) {
  return label.in_s() ? std::string("S") : "G" + std::to_string(label.value);
}

std::uint64_t block_code(std::span<const Sign> v) {
  if (v.size() > 64) throw InvalidParameter("block_code: block longer than 64");
  std::uint64_t code = 0;
  for (const Sign x : v) code = (code << 1) | (x == 1 ? 1U : 0U);
  return code;
}

std::vector<Sign> block_from_code(std::uint64_t code, std::int64_t N) {
  std::vector<Sign> v(static_cast<std::size_t>(N));
  for (std::int64_t i = 0; i < N; ++i) v[static_cast<std::size_t>(i)] = ((code >> (N - 1 - i)) & 1U) ? Sign{1} : Sign{-1};
  return v;
}

BlockClassifier::BlockClassifier(std::int64_t N, int m) : N_(N), m_(m) {
  if (N < 2 || N % 2 != 0) throw InvalidParameter("block length must be even and at least 2");
  if (m < 2 || m % 2 != 0) throw InvalidParameter("classifier modulus must be even and at least 2");
  if (N > kMaxBlockLength) {
    throw BudgetExceeded("block length " + std::to_string(N) + " exceeds " + std::to_string(kMaxBlockLength));
  }
  suffix_ = residue_table(N, m);
  counts_.assign(suffix_.end() - m, suffix_.end());
  A_ = counts_[0];
  for (int j = 2; j < m; j += 2) A_ = std::min(A_, counts_[static_cast<std::size_t>(j)]);
  excess_.resize(static_cast<std::size_t>(m));
  for (int j = 0; j < m; j += 2) excess_[static_cast<std::size_t>(j)] = counts_[static_cast<std::size_t>(j)] - A_;
}

BigCount BlockClassifier::trimmed_size() const {
  return (BigCount(1) << static_cast<unsigned>(N_)) - A_ * (m_ / 2);
}

double BlockClassifier::trimmed_probability() const {
  BigFloat p(trimmed_size());
  p = ldexp(p, -static_cast<int>(N_));
  return static_cast<double>(p);
}

int BlockClassifier::residue_of(std::span<const Sign> v) const {
  if (static_cast<std::int64_t>(v.size()) != N_) {
    throw InvalidParameter("block of length " + std::to_string(v.size()) + ", expected " + std::to_string(N_));
  }
  check_signs(v);
  return static_cast<int>(mod_floor(sum_of(v), m_));
}

BigCount BlockClassifier::lex_rank(std::span<const Sign> v) const {
  const int j = residue_of(v);
  BigCount rank = 0;
  std::int64_t prefix = 0;
  for (std::int64_t i = 1; i <= N_; ++i) {
    const Sign x = v[static_cast<std::size_t>(i - 1)];
    // Vectors agreeing before i with -1 at i precede v.
    if (x == 1) rank += suffix_count(N_ - i, mod_floor(j - prefix + 1, m_));
    prefix += x;
  }
  return rank;
}

BlockLabel BlockClassifier::label(std::span<const Sign> v) const {
  const int j = residue_of(v);
  const BigCount& excess = excess_[static_cast<std::size_t>(j)];
  if (excess.is_zero()) return BlockLabel::good(j);
  // v is trimmed iff fewer than `excess` vectors of its class come after it.
  BigCount after = 0;
  std::int64_t prefix = 0;
  for (std::int64_t i = 1; i <= N_; ++i) {
    const Sign x = v[static_cast<std::size_t>(i - 1)];
    if (x == -1) {
      after += suffix_count(N_ - i, mod_floor(j - prefix - 1, m_));
      if (after >= excess) return BlockLabel::good(j);
    }
    prefix += x;
  }
  return BlockLabel::trimmed();
}

std::uint64_t BlockClassification::trimmed_count() const {
  return static_cast<std::uint64_t>(std::count_if(labels.begin(), labels.end(), [](BlockLabel l) { return l.in_s(); }));
}

BlockClassification classify_blocks(std::int64_t N, int m) {
  if (N < 2 || N % 2 != 0) throw InvalidParameter("classify_blocks: N must be even and at least 2");
  if (m < 2 || m % 2 != 0) throw InvalidParameter("classify_blocks: m must be even and at least 2");
  if (N > kMaxMaterializedBlock) {
    throw BudgetExceeded("classify_blocks: 2^" + std::to_string(N) + " vectors is too many to materialize");
  }
  const auto counts = sum_mod_m_distribution(N, m);
  BlockClassification out;
  out.N = N;
  out.m = m;
  out.A = counts[0];
  for (int j = 2; j < m; j += 2) out.A = std::min(out.A, counts[static_cast<std::size_t>(j)]);
  const auto A = out.A.convert_to<std::uint64_t>();

  const std::uint64_t total = std::uint64_t{1} << N;
  out.labels.resize(static_cast<std::size_t>(total));
  std::vector<std::uint64_t> taken(static_cast<std::size_t>(m), 0);
  for (std::uint64_t code = 0; code < total; ++code) {
    const std::int64_t plus = std::popcount(code);
    const int j = static_cast<int>(mod_floor(2 * plus - N, m));
    auto& used = taken[static_cast<std::size_t>(j)];
    out.labels[static_cast<std::size_t>(code)] = used < A ? BlockLabel::good(j) : BlockLabel::trimmed();
    ++used;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lambda selection

std::vector<double> stopping_length_law(int k, double p, int a_max) {
  if (k < 1) throw InvalidParameter("stopping_length_law: k must be positive");
  if (!(p >= 0.0 && p < 1.0)) throw InvalidParameter("stopping_length_law: p must lie in [0,1)");
  if (a_max < 1) throw InvalidParameter("stopping_length_law: a_max must be positive");
  const auto law = stopping_law(k, BigFloat(p), a_max);
  std::vector<double> out;
  out.reserve(law.size());
  for (const auto& x : law) out.push_back(static_cast<double>(x));
  return out;
}

LambdaChoice choose_lambda(int k, int m, double epsilon, const LambdaSearchOptions& options) {
  if (options.exact_terms < 2) throw InvalidParameter("choose_lambda: need at least two exact tail terms");
  if (!(options.lambda_min > 0.0) || options.lambda_max < options.lambda_min) {
    throw InvalidParameter("choose_lambda: bad lambda grid");
  }
  make_modm_params(k, m, epsilon, options.lambda_min);  // validates k, m, epsilon

  std::vector<LambdaTrial> trials;
  const std::int64_t K = k + 1;
  const int a_max = options.exact_terms;
  for (double lambda = options.lambda_min; lambda <= options.lambda_max; lambda *= 2.0) {
    const ModmParams params = make_modm_params(k, m, epsilon, lambda);
    LambdaTrial trial;
    trial.lambda = lambda;
    trial.N = params.N;
    if (params.N > BlockClassifier::kMaxBlockLength) {
      trial.note = "block length beyond the classifier budget";
      trials.push_back(trial);
      break;
    }

    const auto counts = sum_mod_m_distribution(params.N, params.m);
    const BigFloat p = ldexp(BigFloat(trimmed_from_counts(counts, params.N, params.m)), -static_cast<int>(params.N));
    trial.trimmed_probability = static_cast<double>(p);

    const auto law = stopping_law(k, p, a_max);
    BigFloat worst = 0;
    for (int a = 2; a <= a_max; ++a) {
      const BigFloat allowed = ldexp(BigFloat(epsilon), -(a + 1));
      worst = std::max(worst, law[static_cast<std::size_t>(a - 1)] / allowed);
    }
    trial.worst_ratio = static_cast<double>(worst);

    // Beyond a_max: P(L^mu = aL) <= T(b) := P(B > b) at b = (a-1)K, and
    // T(b + K) / T(b) <= (1 + K/(b-k+1))^k p^K, decreasing in b.
    bool tail_ok = true;
    BigFloat ratio = 0;
    if (p > 0) {
      const std::int64_t b0 = a_max * K;
      ratio = pow(1 + BigFloat(K) / static_cast<double>(b0 - k + 1), k) * pow(p, static_cast<int>(K));
      BigFloat T = 0;
      for (std::int64_t i = 0; i <= k; ++i) {
        T += binomial(b0, i) * pow(1 - p, static_cast<int>(i)) * pow(p, static_cast<int>(b0 - i));
      }
      tail_ok = ratio <= 0.5 && T <= ldexp(BigFloat(epsilon), -(a_max + 2));
      if (!tail_ok) trial.note = "geometric tail bound not established";
    }
    trial.accepted = worst <= 1 && tail_ok;
    trials.push_back(trial);
    if (trial.accepted) {
      LambdaChoice choice;
      choice.params = params;
      choice.trimmed_probability = trial.trimmed_probability;
      for (int a = 2; a <= a_max; ++a) choice.tail.push_back(static_cast<double>(law[static_cast<std::size_t>(a - 1)]));
      choice.ratio_bound = static_cast<double>(ratio);
      choice.trials = std::move(trials);
      return choice;
    }
  }
  std::string what = "choose_lambda: no lambda on the grid satisfies the tail bound for k=" + std::to_string(k) +
                     ", m=" + std::to_string(m) + ", eps=" + std::to_string(epsilon) + " (tried";
  for (const auto& t : trials) what += " " + std::to_string(t.lambda);
  what += ")";
  throw SearchExhausted(what, std::move(trials));
}

// ---------------------------------------------------------------------------
// Lemma sampler

LemmaSampler::LemmaSampler(const ModmParams& params) : params_(params), classifier_(params.N, params.m) {
  if (params.L != (params.k + 1) * params.N) throw InvalidParameter("LemmaSampler: L must equal (k+1) N");
}

LemmaSample LemmaSampler::sample(int mu, SeedStream& stream) const {
  const int m = params_.m;
  if (mu < 0 || mu > m - 2 || mu % 2 != 0) {
    throw InvalidParameter("mu must be an even residue in [0, " + std::to_string(m - 2) + "], got " +
                           std::to_string(mu));
  }
  const auto N = static_cast<std::size_t>(params_.N);
  const std::int64_t K = params_.k + 1;

  LemmaSample out;
  out.mu = mu;
  for (std::uint64_t attempt = 0;; ++attempt) {
    if (attempt > kLemmaRestartBudget) {
      throw BudgetExceeded("lemma sampler: more than " + std::to_string(kLemmaRestartBudget) +
                           " restarts for mu=" + std::to_string(mu) + ", m=" + std::to_string(m) +
                           ", N=" + std::to_string(N) + " (expected acceptance about 2/m)");
    }
    out.y_prefix.clear();
    out.block_trace.clear();
    std::int64_t outside = 0;
    std::int64_t sum = 0;
    while (outside < K) {
      const std::size_t start = out.y_prefix.size();
      out.y_prefix.resize(start + N);
      const std::span<Sign> block(out.y_prefix.data() + start, N);
      stream.fill_signs(block);
      const BlockLabel label = classifier_.label(block);
      out.block_trace.push_back(label);
      if (!label.in_s()) ++outside;
      sum += sum_of(block);
    }
    if (mod_floor(sum, m) != mu) continue;

    out.B = static_cast<std::int64_t>(out.block_trace.size());
    out.L_mu = params_.L * ceil_div(out.B, K);
    out.restarts = attempt;
    const std::size_t filled = out.y_prefix.size();
    out.y_prefix.resize(static_cast<std::size_t>(out.L_mu));
    stream.fill_signs(std::span<Sign>(out.y_prefix).subspan(filled));
    return out;
  }
}

std::vector<Sign> LemmaSampler::sequence(int mu, SeedStream& stream, std::size_t length) const {
  auto s = sample(mu, stream);
  std::vector<Sign> y = std::move(s.y_prefix);
  if (y.size() < length) {
    const std::size_t filled = y.size();
    y.resize(length);
    stream.fill_signs(std::span<Sign>(y).subspan(filled));
  }
  y.resize(length);
  return y;
}

LemmaSample sample_lemma_pair(int mu, const ModmParams& params, SeedStream& stream) {
  return LemmaSampler(params).sample(mu, stream);
}

// ---------------------------------------------------------------------------
// Assembly

AssembledSequence assemble_sequence(const LemmaSampler& sampler, std::int64_t horizon, const SeedStream& seed) {
  const ModmParams& params = sampler.params();
  if (horizon <= 0 || horizon % params.L != 0) {
    throw InvalidParameter("assemble_sequence: horizon must be a positive multiple of L = " +
                           std::to_string(params.L));
  }
  AssembledSequence out;
  auto& values = out.sequence.values;
  out.sequence.construction = Construction::ModmGeneral;
  out.sequence.params = {params.k, params.m, params.epsilon, params.L};
  values.reserve(static_cast<std::size_t>(horizon + params.L));

  std::int64_t rho = 0;
  std::int64_t running = 0;
  for (std::uint64_t nu = 1; rho < horizon; ++nu) {
    const int mu = static_cast<int>(mod_floor(-running, params.m));
    if (mu % 2 != 0) throw std::logic_error("assemble_sequence: odd resynchronization residue");
    SeedStream sub = seed.derive(nu, static_cast<std::uint64_t>(mu));
    const LemmaSample sample = sampler.sample(mu, sub);
    out.steps.push_back({rho, mu, sample.L_mu});
    values.insert(values.end(), sample.y_prefix.begin(), sample.y_prefix.end());
    running += sum_of(sample.y_prefix);
    rho += sample.L_mu;
  }
  values.resize(static_cast<std::size_t>(horizon));
  for (std::int64_t j = 1; j * params.L <= horizon; ++j) out.checkpoints.push_back(j * params.L);
  return out;
}

AssembledSequence assemble_sequence(const ModmParams& params, std::int64_t horizon, const SeedStream& seed) {
  return assemble_sequence(LemmaSampler(params), horizon, seed);
}

IndependenceReport verify_kwise(const SequenceFactory& factory, int k, std::span<const IndexTuple> tuples,
                                const ChiSquareConfig& config, std::string subject) {
  for (const auto& t : tuples) {
    if (static_cast<int>(t.size()) > k) {
      throw InvalidParameter("verify_kwise: tuple with " + std::to_string(t.size()) + " indices exceeds k = " +
                             std::to_string(k));
    }
  }
  return chi_square_tuples(as_binary(factory), tuples, config, std::move(subject));
}

SequenceFactory modm_factory(std::shared_ptr<const LemmaSampler> sampler) {
  return [sampler = std::move(sampler)](SeedStream& stream, std::size_t length) {
    const std::int64_t L = sampler->params().L;
    const std::int64_t horizon = std::max<std::int64_t>(1, ceil_div(static_cast<std::int64_t>(length), L)) * L;
    auto values = assemble_sequence(*sampler, horizon, stream).sequence.values;
    values.resize(length);
    return values;
  };
}

SequenceFactory m4_factory(int k, std::int64_t L) {
  return [k, L](SeedStream& stream, std::size_t length) {
    const std::int64_t horizon = std::max<std::int64_t>(1, ceil_div(static_cast<std::int64_t>(length), L)) * L;
    auto values = build_m4_sequence(k, L, horizon, stream).values;
    values.resize(length);
    return values;
  };
}

}  // namespace kwise
