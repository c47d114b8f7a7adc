#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "kwise/core.hpp"

namespace kwise {

using BigInt = boost::multiprecision::cpp_int;

// Rows 0..n_max of the random-sign triangle
//   X_{n,k} = xi+_{n-1,k-1} X_{n-1,k-1} + xi-_{n-1,k} X_{n-1,k},
// X_{0,0} = 1 and zero outside 0 <= k <= n.
struct SignedTriangle {
  std::vector<std::vector<BigInt>> rows;

  std::int64_t n_max() const noexcept { return static_cast<std::int64_t>(rows.size()) - 1; }
  const BigInt& at(std::int64_t n, std::int64_t k) const {
    return rows.at(static_cast<std::size_t>(n)).at(static_cast<std::size_t>(k));
  }
};

// Supplies the edge signs in consumption order: rows n = 1..n_max, entries
// k = 0..n, xi+ (when k >= 1) before xi- (when k <= n-1).
using SignSource = std::function<Sign()>;

// Number of signs consumed to grow rows 0..n_max: n_max (n_max + 1).
std::uint64_t pascal_sign_count(std::int64_t n_max);

// Rows up to kNarrowRows are computed in 128-bit arithmetic, larger ones in
// arbitrary precision.
inline constexpr std::int64_t kNarrowRows = 125;

SignedTriangle grow_triangle(std::int64_t n_max, SeedStream& seed);
SignedTriangle grow_triangle(std::int64_t n_max, const SignSource& source);

// X_{n,k} alone for n <= kNarrowRows, without keeping the other rows.
std::int64_t triangle_entry(std::int64_t n, std::int64_t k, SeedStream& seed);

BigInt binomial(std::int64_t n, std::int64_t k);

struct CentralStatistics {
  std::int64_t n = 0;  // the coefficient is X_{2n,n}
  std::size_t trials = 0;
  double mean = 0.0;
  double mean_se = 0.0;
  double variance = 0.0;  // E X^2, the mean being zero by symmetry
  double variance_se = 0.0;
  double expected_variance = 0.0;  // C(2n, n)
  double kurtosis = 0.0;           // E X^4 / (E X^2)^2
  double sixth = 0.0;              // E X^6 / (E X^2)^3
  std::map<std::int64_t, std::uint64_t> histogram;

  bool mean_ok(double z = 3.0) const noexcept;
  bool variance_ok(double z = 3.0) const noexcept;
};

inline constexpr std::size_t kMinPascalTrials = 1000;

// Trial t uses seed.derive(t).
CentralStatistics central_statistics(std::int64_t n, std::size_t trials, const SeedStream& seed,
                                     unsigned jobs = 1);

// Empirical E X_{n,k}^2 with its standard error for every 0 <= k <= n <= n_max.
struct SecondMomentCell {
  std::int64_t n = 0;
  std::int64_t k = 0;
  double second = 0.0;
  double standard_error = 0.0;
  double expected = 0.0;  // C(n, k)
  bool ok(double z = 3.0) const noexcept;
};

std::vector<SecondMomentCell> second_moment_grid(std::int64_t n_max, std::size_t trials, const SeedStream& seed,
                                                 unsigned jobs = 1);

}  // namespace kwise
