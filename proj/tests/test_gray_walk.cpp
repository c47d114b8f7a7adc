#include <algorithm>
#include <bit>
#include <vector>

#include "doctest.h"
#include "kwise/gray_walk.hpp"

using namespace kwise;

namespace {

// Reflect-and-extend: code(n) = code(n-1) followed by code(n-1) reversed with
// bit n set. Entries are masks, bit j-1 <-> element j.
std::vector<std::uint64_t> recursive_gray_code(unsigned n) {
  std::vector<std::uint64_t> code{0};
  for (unsigned order = 1; order <= n; ++order) {
    const std::size_t half = code.size();
    for (std::size_t t = 0; t < half; ++t) code.push_back(code[half - 1 - t] | (std::uint64_t{1} << (order - 1)));
  }
  return code;
}

std::vector<std::uint32_t> members_of(std::uint64_t mask) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t j = 1; mask; ++j, mask >>= 1) {
    if (mask & 1) out.push_back(j);
  }
  return out;
}

std::vector<Sign> seed_with_first_negative(unsigned J, std::vector<Sign> tail) {
  std::vector<Sign> seed(J - 1, 1);
  seed.push_back(-1);
  seed.insert(seed.end(), tail.begin(), tail.end());
  return seed;
}

}  // namespace

TEST_CASE("gray subsets reproduce the printed listing") {
  const std::vector<std::vector<std::uint32_t>> listing{
      {}, {1}, {1, 2}, {2}, {2, 3}, {1, 2, 3}, {1, 3}, {3}, {3, 4}};
  for (std::uint64_t i = 0; i < listing.size(); ++i) CHECK(gray_subset(i).members == listing[i]);
}

TEST_CASE("closed form matches the recursive definition below 2^16") {
  const auto code = recursive_gray_code(16);
  REQUIRE(code.size() == 65536);
  for (std::uint64_t i = 0; i < code.size(); ++i) {
    REQUIRE(subset_mask(i) == code[i]);
    REQUIRE(gray_subset(i).members == members_of(code[i]));
  }
  // Lower orders are prefixes of higher ones, so the infinite code is well defined.
  const auto shorter = recursive_gray_code(9);
  CHECK(std::equal(shorter.begin(), shorter.end(), code.begin()));
}

TEST_CASE("consecutive subsets differ in exactly one element") {
  for (std::uint64_t i = 0; i + 1 < (1U << 16); ++i) {
    REQUIRE(std::popcount(subset_mask(i) ^ subset_mask(i + 1)) == 1);
  }
  for (std::uint64_t n = 1; n <= 16; ++n) {
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << n); i += 97) {
      const auto m = gray_subset(i).members;
      CHECK((m.empty() || m.back() <= n));
    }
  }
}

TEST_CASE("gray_sign is the product over the subset") {
  const std::vector<Sign> anything{1, -1, 1};
  CHECK(gray_sign(0, anything) == 1);
  const std::vector<Sign> neg{-1, 1};
  CHECK(gray_sign(1, neg) == -1);
  const std::vector<Sign> xi{-1, -1, 1};
  CHECK(gray_sign(5, xi) == 1);
  // Enumeration oracle over {1,2,3}.
  for (int s = 0; s < 8; ++s) {
    const std::vector<Sign> seed{Sign((s & 1) ? -1 : 1), Sign((s & 2) ? -1 : 1), Sign((s & 4) ? -1 : 1)};
    CHECK(gray_sign(5, seed) == seed[0] * seed[1] * seed[2]);
  }
  CHECK_THROWS_AS(gray_sign(4, neg), InvalidParameter);
}

TEST_CASE("consecutive quotients expose the seed") {
  SeedStream stream(3);
  const auto seed = iid_sequence(12, stream).values;
  for (std::uint64_t i = 0; i + 1 < 4096; ++i) {
    const auto j = std::countr_zero(i + 1);
    REQUIRE(gray_sign(i + 1, seed) * gray_sign(i, seed) == seed[static_cast<std::size_t>(j)]);
  }
}

TEST_CASE("gray walk paths") {
  const std::vector<Sign> ones(4, 1);
  const auto up = gray_walk_path(ones, 3, true);
  CHECK(up.first_time == 0);
  CHECK(up.sums == std::vector<std::int64_t>{1, 2, 3, 4});
  CHECK(gray_walk_path(ones, 3).sums == std::vector<std::int64_t>{1, 2, 3});

  const std::vector<Sign> first_neg{-1, 1};
  const auto p = gray_walk_path(first_neg, 1, true);
  CHECK(p.at_time(0) == 1);
  CHECK(p.at_time(1) == 0);

  // J = 3: simulate directly from the recursive code.
  const std::vector<Sign> xi{1, 1, -1};
  const auto code = recursive_gray_code(3);
  std::vector<std::int64_t> expected;
  std::int64_t s = 0;
  for (std::uint64_t i = 0; i < 8; ++i) {
    Sign x = 1;
    for (auto j : members_of(code[i])) x = static_cast<Sign>(x * xi[j - 1]);
    s += x;
    expected.push_back(s);
  }
  const auto walk = gray_walk_path(xi, 7, true);
  CHECK(walk.sums == expected);
  CHECK(walk.sums == std::vector<std::int64_t>{1, 2, 3, 4, 3, 2, 1, 0});
  CHECK(*std::max_element(walk.sums.begin(), walk.sums.end()) == 4);

  CHECK_THROWS_AS(gray_walk_path(xi, 8), InvalidParameter);
  CHECK_THROWS_AS(gray_walk_path(xi, 0), InvalidParameter);
}

TEST_CASE("predicted extremes") {
  const std::vector<Sign> j1{-1};
  const auto a = predicted_extremes(j1);
  REQUIRE(a);
  CHECK(a->sup_abs == 2);
  CHECK(a->sup == 0);
  CHECK(a->inf == -2);

  const std::vector<Sign> j3{1, 1, -1, 1};
  const auto b = predicted_extremes(j3);
  REQUIRE(b);
  CHECK(b->first_negative == 3);
  CHECK(b->sup_abs == 5);
  CHECK(b->sup == 3);
  CHECK(b->inf == -5);

  const std::vector<Sign> none(10, 1);
  CHECK_FALSE(predicted_extremes(none).has_value());
}

TEST_CASE("walk extremes match the almost-sure constants") {
  SeedStream root(2024);
  int inf_attained = 0;
  for (unsigned J = 1; J <= 8; ++J) {
    const std::int64_t horizon = std::int64_t{1} << (J + 4);
    for (int t = 0; t < 32; ++t) {
      SeedStream s = root.derive(J, t);
      const auto seed = seed_with_first_negative(J, iid_sequence(5, s).values);
      REQUIRE(seed.size() >= seed_bits_for(horizon));
      const auto predicted = predicted_extremes(seed);
      REQUIRE(predicted);
      const auto ex = observe_extremes(gray_walk_path(seed, horizon));
      CHECK(ex.max == predicted->sup);
      CHECK(ex.min >= predicted->inf);
      CHECK(ex.max_abs <= predicted->sup_abs);
      inf_attained += ex.min == predicted->inf;

      // Primed walk: sup S' = -inf S' = 2^(J-1) within the same horizon.
      const auto primed = observe_extremes(gray_walk_path(seed, horizon, true));
      CHECK(primed.max == (std::int64_t{1} << (J - 1)));
    }
  }
  MESSAGE("infimum attained in " << inf_attained << " of 256 runs");
}

TEST_CASE("lexicographic ordering stays bounded") {
  SeedStream root(77);
  for (unsigned J = 1; J <= 6; ++J) {
    const auto seed = seed_with_first_negative(J, iid_sequence(10, root).values);
    const auto path = gray_walk_path(seed, std::int64_t{1} << (J + 8), false, SubsetOrder::Lexicographic);
    const auto ex = observe_extremes(path);
    // Each dyadic block of length 2^J sums to zero once xi_J = -1 is included.
    CHECK(ex.max_abs <= (std::int64_t{1} << J));
  }
}

TEST_CASE("pairwise independence is exact") {
  const auto r3 = verify_pairwise_exact(3);
  CHECK(r3.passed);
  CHECK(r3.tuples_tested == 21);
  CHECK(r3.sample_size == 8);

  const auto r7 = verify_pairwise_exact(7);
  CHECK(r7.passed);
  CHECK(r7.tuples_tested == 127 * 126 / 2);

  CHECK(verify_pairwise_exact(5, SubsetOrder::Lexicographic).passed);
}

TEST_CASE("the gray walk is not 3-wise independent") {
  const auto r = verify_gray_kwise_exact(4, 3, 7);
  REQUIRE_FALSE(r.passed);
  const auto& first = r.violations.front();
  CHECK(first.indices == IndexTuple{1, 2, 3});
  CHECK(first.observed.size() == 8);
}

TEST_CASE("exact moment sums over all seeds") {
  const auto sums = gray_exact_moment_sums(10);
  for (std::size_t n = 1; n <= sums.first.size(); ++n) {
    REQUIRE(sums.first[n - 1] == 0);
    REQUIRE(sums.second[n - 1] == static_cast<std::int64_t>(n) * 1024);
  }
}
