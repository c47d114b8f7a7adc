#include <cmath>
#include <vector>

#include "doctest.h"
#include "kwise/core.hpp"
#include "kwise/parallel.hpp"

using namespace kwise;

TEST_CASE("seed stream replays identically from the same seed") {
  SeedStream a(42), b(42);
  const Sign a1 = a.next_sign(), a2 = a.next_sign();
  const Sign b1 = b.next_sign(), b2 = b.next_sign();
  CHECK(a1 == b1);
  CHECK(a2 == b2);
  CHECK(a.position() == 2);

  SeedStream c(42), d(42);
  for (int i = 0; i < 1000; ++i) REQUIRE(c.next_sign() == d.next_sign());
}

TEST_CASE("neighbouring seeds give different streams") {
  SeedStream a(42), b(43);
  bool differ = false;
  for (int i = 0; i < 64; ++i) differ |= a.next_sign() != b.next_sign();
  CHECK(differ);
}

TEST_CASE("a million draws are signs with mean inside 4/sqrt(n)") {
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xDEADBEEFULL}) {
    SeedStream s(seed);
    long long sum = 0;
    for (int i = 0; i < 1000000; ++i) {
      const Sign x = s.next_sign();
      REQUIRE((x == 1 || x == -1));
      sum += x;
    }
    CHECK(std::abs(static_cast<double>(sum) / 1e6) < 0.004);
  }
}

TEST_CASE("derived substreams are reproducible and distinct") {
  const SeedStream root(7);
  SeedStream a = root.derive(3, 5), b = root.derive(3, 5), c = root.derive(5, 3);
  bool differ = false;
  for (int i = 0; i < 128; ++i) {
    const Sign x = a.next_sign();
    REQUIRE(x == b.next_sign());
    differ |= x != c.next_sign();
  }
  CHECK(differ);
  // Deriving does not advance the parent.
  SeedStream p(7), q(7);
  (void)p.derive(1);
  CHECK(p.next_u64() == q.next_u64());
}

TEST_CASE("below stays in range and hits every value") {
  SeedStream s(9);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = s.below(7);
    REQUIRE(v < 7);
    ++hits[v];
  }
  for (int h : hits) CHECK(h > 800);
}

TEST_CASE("accumulate_walk sums and reduces") {
  const std::vector<Sign> xs{1, 1, -1};
  const auto path = accumulate_walk(xs);
  CHECK(path.sums == std::vector<std::int64_t>{1, 2, 1});
  CHECK(path.reduced.empty());

  const std::vector<Sign> up(8, 1);
  const auto mod4 = accumulate_walk(up, 4);
  CHECK(mod4.reduced == std::vector<std::int64_t>{1, 2, 3, 0, 1, 2, 3, 0});

  const std::vector<Sign> down(3, -1);
  CHECK(accumulate_walk(down, 4).reduced == std::vector<std::int64_t>{3, 2, 1});
}

TEST_CASE("accumulate_walk rejects bad input") {
  const std::vector<Sign> empty;
  CHECK_THROWS_AS(accumulate_walk(empty), InvalidParameter);
  const std::vector<Sign> xs{1, -1};
  CHECK_THROWS_AS(accumulate_walk(xs, 0), InvalidParameter);
  const std::vector<Sign> bad{1, 0, -1};
  CHECK_THROWS_AS(accumulate_walk(bad), InvalidParameter);
}

TEST_CASE("walk steps are unit and concatenation is associative") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SeedStream s(seed);
    const auto a = iid_sequence(1 + seed * 3, s).values;
    const auto b = iid_sequence(5 + seed, s).values;
    std::vector<Sign> ab(a);
    ab.insert(ab.end(), b.begin(), b.end());

    const auto whole = accumulate_walk(ab);
    const auto left = accumulate_walk(a);
    const auto right = accumulate_walk(b);
    for (std::size_t i = 0; i < left.size(); ++i) REQUIRE(whole.sums[i] == left.sums[i]);
    for (std::size_t i = 0; i < right.size(); ++i) {
      REQUIRE(whole.sums[a.size() + i] == left.sums.back() + right.sums[i]);
    }
    std::int64_t plus = 0;
    for (std::size_t i = 0; i < ab.size(); ++i) {
      if (i > 0) REQUIRE(std::abs(whole.sums[i] - whole.sums[i - 1]) == 1);
      plus += ab[i] == 1;
    }
    CHECK(whole.sums.back() == plus - (static_cast<std::int64_t>(ab.size()) - plus));
  }
}

TEST_CASE("parallel_for result does not depend on the worker count") {
  std::vector<std::uint64_t> one(1000), four(1000);
  const SeedStream root(11);
  parallel_for(one.size(), 1, [&](std::size_t i) { one[i] = root.derive(i).next_u64(); });
  parallel_for(four.size(), 4, [&](std::size_t i) { four[i] = root.derive(i).next_u64(); });
  CHECK(one == four);
}
