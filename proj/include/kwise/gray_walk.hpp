#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kwise/core.hpp"
#include "kwise/independence_lab.hpp"

namespace kwise {

// Order in which finite subsets of the seed indices are listed.
//  Gray:          the infinite reflected Gray code (consecutive sets differ in one element)
//  Lexicographic: the standard Walsh ordering, A_i = binary digits of i
enum class SubsetOrder { Gray, Lexicographic };

// Bit j-1 of the mask is set iff j belongs to A_i.
constexpr std::uint64_t subset_mask(std::uint64_t i, SubsetOrder order = SubsetOrder::Gray) noexcept {
  return order == SubsetOrder::Gray ? (i ^ (i >> 1)) : i;
}

struct GraySubset {
  std::uint64_t index = 0;
  std::vector<std::uint32_t> members;  // ascending, 1-based
};

GraySubset gray_subset(std::uint64_t i, SubsetOrder order = SubsetOrder::Gray);

// X_i = product of xi_j over j in A_i; seed[0] is xi_1. X_0 = +1.
Sign gray_sign(std::uint64_t i, std::span<const Sign> seed, SubsetOrder order = SubsetOrder::Gray);

// Partial sums S_1..S_n of the gray walk, or S'_0..S'_n (which also counts
// X_0 = +1) when include_x0 is set. The seed must cover every A_i up to i = n.
WalkPath gray_walk_path(std::span<const Sign> seed, std::int64_t n, bool include_x0 = false,
                        SubsetOrder order = SubsetOrder::Gray);

// Number of seed signs needed to evaluate X_0..X_n.
unsigned seed_bits_for(std::int64_t n, SubsetOrder order = SubsetOrder::Gray);

// Almost-sure extremes of S_n as a function of J = min{j : xi_j = -1}.
struct PredictedExtremes {
  unsigned first_negative = 0;  // J
  std::int64_t sup_abs = 0;     // 2^(J-1) + 1
  std::int64_t sup = 0;         // 2^(J-1) - 1
  std::int64_t inf = 0;         // -(2^(J-1) + 1)
};

// std::nullopt when the prefix holds no -1 (the walk is unbounded so far).
std::optional<PredictedExtremes> predicted_extremes(std::span<const Sign> seed);

struct ObservedExtremes {
  std::int64_t max = 0;
  std::int64_t min = 0;
  std::int64_t max_abs = 0;
  std::int64_t argmax = 0;  // first time the max is reached
  std::int64_t argmin = 0;  // first time the min is reached
};

ObservedExtremes observe_extremes(const WalkPath& path);

// Seed index s encodes xi_j = -1 iff bit j-1 of s is set; outputs X_1..X_{2^J - 1}.
FiniteSeedGenerator gray_finite_generator(unsigned J, SubsetOrder order = SubsetOrder::Gray);

inline constexpr unsigned kMaxPairwiseExactBits = 20;

// Exhaustive check, over all 2^J seeds, that every pair X_i, X_i' with
// 1 <= i < i' < 2^J is uniform on {±1}^2.
IndependenceReport verify_pairwise_exact(unsigned J, SubsetOrder order = SubsetOrder::Gray);

// Exhaustive check of all sets of at most k indices inside [1, last].
IndependenceReport verify_gray_kwise_exact(unsigned J, int k, std::int64_t last,
                                           SubsetOrder order = SubsetOrder::Gray);

// Over all 2^J seeds: sum of S_n and of S_n^2 for n = 1..2^J - 1 (entry n-1).
struct ExactMomentSums {
  unsigned J = 0;
  std::vector<std::int64_t> first;
  std::vector<std::int64_t> second;
};

ExactMomentSums gray_exact_moment_sums(unsigned J, SubsetOrder order = SubsetOrder::Gray);

}  // namespace kwise
