#include "kwise/gray_walk.hpp"

#include <algorithm>
#include <bit>
#include <string>

namespace kwise {

namespace {

std::uint64_t negative_mask(std::span<const Sign> seed) {
  check_signs(seed);
  std::uint64_t mask = 0;
  const std::size_t usable = std::min<std::size_t>(seed.size(), 64);
  for (std::size_t j = 0; j < usable; ++j) {
    if (seed[j] == -1) mask |= std::uint64_t{1} << j;
  }
  return mask;
}

Sign character(std::uint64_t subset, std::uint64_t negatives) noexcept {
  return (std::popcount(subset & negatives) & 1) ? Sign{-1} : Sign{1};
}

void require_cover(std::uint64_t i, std::size_t available, SubsetOrder order) {
  const auto needed = static_cast<std::size_t>(std::bit_width(subset_mask(i, order)));
  if (needed > available) {
    throw InvalidParameter("seed prefix of length " + std::to_string(available) + " does not cover A_" +
                           std::to_string(i) + " (needs " + std::to_string(needed) + ")");
  }
}

std::string order_name(SubsetOrder order) { return order == SubsetOrder::Gray ? "gray" : "lexicographic"; }

}  // namespace

GraySubset gray_subset(std::uint64_t i, SubsetOrder order) {
  GraySubset subset;
  subset.index = i;
  for (std::uint64_t mask = subset_mask(i, order); mask != 0; mask &= mask - 1) {
    subset.members.push_back(static_cast<std::uint32_t>(std::countr_zero(mask)) + 1);
  }
  return subset;
}

Sign gray_sign(std::uint64_t i, std::span<const Sign> seed, SubsetOrder order) {
  require_cover(i, seed.size(), order);
  return character(subset_mask(i, order), negative_mask(seed));
}

unsigned seed_bits_for(std::int64_t n, SubsetOrder order) {
  if (n < 0) throw InvalidParameter("seed_bits_for: negative index");
  // Both orders use exactly the binary digits of i below the top bit of n.
  (void)order;
  return static_cast<unsigned>(std::bit_width(static_cast<std::uint64_t>(n)));
}

WalkPath gray_walk_path(std::span<const Sign> seed, std::int64_t n, bool include_x0, SubsetOrder order) {
  if (n < 1) throw InvalidParameter("gray_walk_path: n must be at least 1");
  require_cover(static_cast<std::uint64_t>(n), seed.size(), order);
  const std::uint64_t negatives = negative_mask(seed);

  WalkPath path;
  path.first_time = include_x0 ? 0 : 1;
  path.sums.reserve(static_cast<std::size_t>(n) + 1);
  std::int64_t s = 0;
  if (include_x0) {
    s = 1;
    path.sums.push_back(s);
  }
  for (std::int64_t i = 1; i <= n; ++i) {
    s += character(subset_mask(static_cast<std::uint64_t>(i), order), negatives);
    path.sums.push_back(s);
  }
  return path;
}

std::optional<PredictedExtremes> predicted_extremes(std::span<const Sign> seed) {
  check_signs(seed);
  const auto it = std::find(seed.begin(), seed.end(), Sign{-1});
  if (it == seed.end()) return std::nullopt;
  const auto J = static_cast<unsigned>(it - seed.begin()) + 1;
  if (J > 62) throw InvalidParameter("predicted_extremes: first negative seed index too large for 64-bit sums");
  const std::int64_t half = std::int64_t{1} << (J - 1);
  return PredictedExtremes{J, half + 1, half - 1, -(half + 1)};
}

ObservedExtremes observe_extremes(const WalkPath& path) {
  if (path.sums.empty()) throw InvalidParameter("observe_extremes: empty path");
  ObservedExtremes ex;
  ex.max = ex.min = path.sums.front();
  ex.argmax = ex.argmin = path.first_time;
  for (std::size_t t = 1; t < path.sums.size(); ++t) {
    const auto v = path.sums[t];
    if (v > ex.max) {
      ex.max = v;
      ex.argmax = path.first_time + static_cast<std::int64_t>(t);
    }
    if (v < ex.min) {
      ex.min = v;
      ex.argmin = path.first_time + static_cast<std::int64_t>(t);
    }
  }
  ex.max_abs = std::max(ex.max, -ex.min);
  return ex;
}

FiniteSeedGenerator gray_finite_generator(unsigned J, SubsetOrder order) {
  if (J < 1 || J > 63) throw InvalidParameter("gray_finite_generator: J out of range");
  FiniteSeedGenerator gen;
  gen.name = order_name(order);
  gen.seed_bits = J;
  gen.length = (std::size_t{1} << J) - 1;
  gen.generate = [order](std::uint64_t seed, std::span<Sign> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = character(subset_mask(i + 1, order), seed);
  };
  return gen;
}

IndependenceReport verify_gray_kwise_exact(unsigned J, int k, std::int64_t last, SubsetOrder order) {
  if (J < 1 || J > kMaxPairwiseExactBits) {
    throw InvalidParameter("exact verification needs 1 <= J <= " + std::to_string(kMaxPairwiseExactBits));
  }
  const PackedSeedTable table(gray_finite_generator(J, order));
  return exact_kwise(table, k, 1, last,
                     order_name(order) + " walk, " + std::to_string(k) + "-wise, J=" + std::to_string(J));
}

IndependenceReport verify_pairwise_exact(unsigned J, SubsetOrder order) {
  if (J < 2) throw InvalidParameter("verify_pairwise_exact: need J >= 2 for a pair of nonconstant indices");
  return verify_gray_kwise_exact(J, 2, (std::int64_t{1} << J) - 1, order);
}

ExactMomentSums gray_exact_moment_sums(unsigned J, SubsetOrder order) {
  if (J < 1 || J > kMaxPairwiseExactBits) {
    throw InvalidParameter("gray_exact_moment_sums: need 1 <= J <= " + std::to_string(kMaxPairwiseExactBits));
  }
  const std::size_t horizon = (std::size_t{1} << J) - 1;
  ExactMomentSums sums;
  sums.J = J;
  sums.first.assign(horizon, 0);
  sums.second.assign(horizon, 0);
  for (std::uint64_t seed = 0; seed < (std::uint64_t{1} << J); ++seed) {
    std::int64_t s = 0;
    for (std::size_t n = 1; n <= horizon; ++n) {
      s += character(subset_mask(n, order), seed);
      sums.first[n - 1] += s;
      sums.second[n - 1] += s * s;
    }
  }
  return sums;
}

}  // namespace kwise
