#include <cmath>
#include <vector>

#include "doctest.h"
#include "kwise/gray_walk.hpp"
#include "kwise/independence_lab.hpp"

using namespace kwise;

namespace {

SequenceFactory iid_factory() {
  return [](SeedStream& s, std::size_t n) { return iid_sequence(n, s).values; };
}

}  // namespace

TEST_CASE("exact joint of i.i.d. bits is uniform") {
  const auto gen = iid_finite_generator(3);
  const std::vector<std::int64_t> idx{1, 2};
  const auto table = exact_joint(gen, idx);
  CHECK(table.total == 8);
  CHECK(table.counts == std::vector<std::uint64_t>{2, 2, 2, 2});
}

TEST_CASE("exact joint of the gray walk at (1,2) over 2^5 seeds") {
  const auto gen = gray_finite_generator(5);
  const std::vector<std::int64_t> idx{1, 2};
  CHECK(exact_joint(gen, idx).counts == std::vector<std::uint64_t>{8, 8, 8, 8});
  const PackedSeedTable packed(gen);
  CHECK(packed.joint(idx).counts == std::vector<std::uint64_t>{8, 8, 8, 8});
}

TEST_CASE("exact budget is enforced") {
  auto gen = iid_finite_generator(23);
  const std::vector<std::int64_t> idx{1};
  CHECK_THROWS_AS(exact_joint(gen, idx), BudgetExceeded);
  CHECK_THROWS_AS(PackedSeedTable{gen}, BudgetExceeded);
}

TEST_CASE("packed joint tables agree with direct enumeration") {
  const auto gen = gray_finite_generator(6);
  const PackedSeedTable packed(gen);
  for (const auto& idx : std::vector<IndexTuple>{{1, 2, 3}, {4, 9, 17, 33}, {5}, {2, 7, 11, 40, 63}}) {
    CHECK(packed.joint(idx).counts == exact_joint(gen, idx).counts);
  }
}

TEST_CASE("exact mode on i.i.d. bits passes for every set of every size") {
  const PackedSeedTable table(iid_finite_generator(10));
  const auto report = exact_kwise(table, 10, 1, 10);
  CHECK(report.passed);
  CHECK(report.tuples_tested == 1);
  CHECK(report.sample_size == 1024);
}

TEST_CASE("exact mode flags a constrained tuple with its table") {
  // X_3 = X_1 * X_2.
  FiniteSeedGenerator gen;
  gen.seed_bits = 2;
  gen.length = 3;
  gen.generate = [](std::uint64_t s, std::span<Sign> out) {
    out[0] = (s & 1) ? -1 : 1;
    out[1] = (s & 2) ? -1 : 1;
    out[2] = static_cast<Sign>(out[0] * out[1]);
  };
  const PackedSeedTable table(gen);
  CHECK(exact_kwise(table, 2, 1, 3).passed);
  const auto report = exact_kwise(table, 3, 1, 3);
  REQUIRE_FALSE(report.passed);
  REQUIRE(report.violations.size() == 1);
  const auto& v = report.violations.front();
  CHECK(v.indices == IndexTuple{1, 2, 3});
  std::uint64_t total = 0;
  for (auto c : v.observed) total += c;
  CHECK(total == 4);
  // Patterns with an odd number of -1 entries never occur.
  CHECK(v.observed[1] == 0);
  CHECK(v.observed[7] == 0);
}

TEST_CASE("random tuples are sorted, distinct and inside the window") {
  const auto tuples = random_tuples(4, 50, 10, 30, 5);
  CHECK(tuples.size() == 50);
  for (const auto& t : tuples) {
    REQUIRE(t.size() == 4);
    for (std::size_t a = 0; a < t.size(); ++a) {
      CHECK(t[a] >= 10);
      CHECK(t[a] <= 30);
      if (a > 0) CHECK(t[a] > t[a - 1]);
    }
  }
  CHECK(random_tuples(4, 50, 10, 30, 5) == tuples);
}

TEST_CASE("chi-square on an i.i.d. stream passes") {
  ChiSquareConfig cfg;
  cfg.k = 3;
  cfg.num_tuples = 100;
  cfg.trials = 100000;
  cfg.alpha = 0.01;
  cfg.window_last = 64;
  const auto report = chi_square_tuples(as_binary(iid_factory()), cfg, "iid");
  CHECK(report.passed);
  CHECK(report.tuples_tested == 100);
  CHECK(report.mode == TestMode::MonteCarlo);
}

TEST_CASE("chi-square rejects too few trials") {
  ChiSquareConfig cfg;
  cfg.k = 3;
  cfg.trials = 799;
  CHECK_THROWS_AS(chi_square_tuples(as_binary(iid_factory()), cfg), InvalidParameter);
}

TEST_CASE("chi-square false positive rate on i.i.d. input is near alpha") {
  ChiSquareConfig cfg;
  cfg.k = 3;
  cfg.num_tuples = 10;
  cfg.trials = 2000;
  cfg.alpha = 0.05;
  cfg.window_last = 40;
  int rejections = 0;
  const int runs = 200;
  for (int r = 0; r < runs; ++r) {
    cfg.tuple_seed = 1000 + r;
    cfg.trial_seed = 5000 + r;
    rejections += chi_square_tuples(as_binary(iid_factory()), cfg).passed ? 0 : 1;
  }
  const double rate = rejections / static_cast<double>(runs);
  const double sigma = std::sqrt(0.05 * 0.95 / runs);
  MESSAGE("rejection rate " << rate);
  CHECK(std::abs(rate - 0.05) <= 3 * sigma);
}

TEST_CASE("chi-square detects a planted product relation") {
  const SequenceFactory planted = [](SeedStream& s, std::size_t n) {
    auto v = iid_sequence(n, s).values;
    v[4] = static_cast<Sign>(v[0] * v[2]);
    return v;
  };
  ChiSquareConfig cfg;
  cfg.k = 3;
  cfg.trials = 5000;
  const std::vector<IndexTuple> tuples{{1, 3, 5}, {2, 4, 6}};
  const auto report = chi_square_tuples(as_binary(planted), tuples, cfg);
  REQUIRE_FALSE(report.passed);
  CHECK(report.violations.front().indices == IndexTuple{1, 3, 5});
}

TEST_CASE("chi-square with Bernoulli marginals") {
  const BinarySampler biased = [](SeedStream& s, std::size_t n) {
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = s.bernoulli(0.3) ? 1 : 0;
    return v;
  };
  ChiSquareConfig cfg;
  cfg.k = 2;
  cfg.trials = 20000;
  cfg.num_tuples = 20;
  cfg.window_last = 30;
  cfg.one_probability = 0.3;
  CHECK(chi_square_tuples(biased, cfg).passed);
  cfg.one_probability = 0.5;
  CHECK_FALSE(chi_square_tuples(biased, cfg).passed);
}

TEST_CASE("chi-square statistic and tail") {
  const std::vector<std::uint64_t> obs{10, 20};
  const std::vector<double> exp{15, 15};
  CHECK(chi_square_statistic(obs, exp) == doctest::Approx(10.0 / 3.0));
  // P(chi2_1 > 3.841) = 0.05.
  CHECK(chi_square_upper_tail(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi_square_upper_tail(0.0, 3) == 1.0);
}

TEST_CASE("moment report reproduces the i.i.d. fourth moment at n = 3") {
  // All 8 sign vectors, each repeated 125 times.
  std::vector<std::int64_t> values;
  for (int rep = 0; rep < 125; ++rep) {
    for (int v = 0; v < 8; ++v) {
      std::int64_t s = 0;
      for (int b = 0; b < 3; ++b) s += ((v >> b) & 1) ? -1 : 1;
      values.push_back(s);
    }
  }
  const auto r = moment_report(values, 3);
  CHECK(r.mean.value == doctest::Approx(0.0));
  CHECK(r.second.value == doctest::Approx(3.0));
  CHECK(r.fourth.value == doctest::Approx(21.0));
  CHECK(r.expected_fourth() == doctest::Approx(21.0));
}

TEST_CASE("moment report edge cases") {
  std::vector<std::int64_t> ones(1000);
  for (std::size_t i = 0; i < ones.size(); ++i) ones[i] = (i % 2) ? 1 : -1;
  const auto r = moment_report(ones, 1);
  CHECK(r.fourth.value == doctest::Approx(1.0));
  CHECK(r.expected_fourth() == doctest::Approx(1.0));
  CHECK(r.second.standard_error == doctest::Approx(0.0));
  std::vector<std::int64_t> few(999, 1);
  CHECK_THROWS_AS(moment_report(few, 1), InvalidParameter);
}

TEST_CASE("moment identities hold for i.i.d. walks") {
  for (std::int64_t n : {10, 100, 1000}) {
    SeedStream root(static_cast<std::uint64_t>(n));
    std::vector<std::int64_t> values;
    for (int t = 0; t < 20000; ++t) {
      SeedStream s = root.derive(t);
      std::int64_t sum = 0;
      for (std::int64_t i = 0; i < n; ++i) sum += s.next_sign();
      values.push_back(sum);
    }
    const auto r = moment_report(values, n);
    CHECK(r.mean_ok());
    CHECK(r.second_ok());
    CHECK(r.fourth_ok());
  }
}

TEST_CASE("fourth-moment tail bound") {
  CHECK(fourth_moment_tail_bound(2, 1) == doctest::Approx(1.0 / 8.0));
  CHECK(fourth_moment_tail_bound(1, 0) == doctest::Approx(1.0));
  CHECK(fourth_moment_tail_bound(1000, 0) == doctest::Approx(1e6 / (3e6 - 2e3)));

  // n = 2: S_2 in {2, 0, 0, -2}.
  const std::vector<std::int64_t> s2{2, 0, 0, -2};
  const auto c = tail_bound_check(s2, 2, 1);
  CHECK(c.empirical == doctest::Approx(0.5));
  CHECK(c.lower_bound == doctest::Approx(0.125));
  CHECK(c.passed);

  const std::vector<std::int64_t> s1{1, -1};
  const auto e = tail_bound_check(s1, 1, 0);
  CHECK(e.empirical == doctest::Approx(1.0));
  CHECK(e.passed);

  CHECK_THROWS_AS(tail_bound_check(s2, 2, 2), InvalidParameter);
}

TEST_CASE("bonferroni z keeps the family-wise level") {
  CHECK(bonferroni_z(3.0, 1) == 3.0);
  // 2 * (1 - Phi(3)) = 0.0026998; split over 231 tests.
  CHECK(bonferroni_z(3.0, 231) == doctest::Approx(4.41).epsilon(0.01));
  CHECK(bonferroni_z(3.0, 2) > 3.0);
}
