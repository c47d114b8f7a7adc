#include "kwise/pascal.hpp"

#include <cmath>
#include <string>

#include "kwise/parallel.hpp"

namespace kwise {

namespace {

using Narrow = __int128;

template <typename T>
std::vector<std::vector<T>> grow_rows(std::int64_t n_max, const SignSource& source) {
  std::vector<std::vector<T>> rows(static_cast<std::size_t>(n_max) + 1);
  rows[0] = {T(1)};
  for (std::int64_t n = 1; n <= n_max; ++n) {
    const auto& prev = rows[static_cast<std::size_t>(n - 1)];
    auto& row = rows[static_cast<std::size_t>(n)];
    row.assign(static_cast<std::size_t>(n) + 1, T(0));
    for (std::int64_t k = 0; k <= n; ++k) {
      T x(0);
      if (k >= 1) {
        const T& left = prev[static_cast<std::size_t>(k - 1)];
        if (source() > 0) x += left; else x -= left;
      }
      if (k <= n - 1) {
        const T& right = prev[static_cast<std::size_t>(k)];
        if (source() > 0) x += right; else x -= right;
      }
      row[static_cast<std::size_t>(k)] = x;
    }
  }
  return rows;
}

BigInt widen(Narrow v) {
  const bool negative = v < 0;
  unsigned __int128 u = negative ? static_cast<unsigned __int128>(-v) : static_cast<unsigned __int128>(v);
  BigInt out = static_cast<std::uint64_t>(u >> 64);
  out <<= 64;
  out += static_cast<std::uint64_t>(u);
  return negative ? BigInt(-out) : out;
}

void check_rows(std::int64_t n_max) {
  if (n_max < 0) throw InvalidParameter("pascal: n_max must be non-negative");
}

}  // namespace

std::uint64_t pascal_sign_count(std::int64_t n_max) {
  check_rows(n_max);
  return static_cast<std::uint64_t>(n_max) * static_cast<std::uint64_t>(n_max + 1);
}

SignedTriangle grow_triangle(std::int64_t n_max, const SignSource& source) {
  check_rows(n_max);
  SignedTriangle t;
  if (n_max <= kNarrowRows) {
    const auto rows = grow_rows<Narrow>(n_max, source);
    t.rows.resize(rows.size());
    for (std::size_t n = 0; n < rows.size(); ++n) {
      for (const auto v : rows[n]) t.rows[n].push_back(widen(v));
    }
  } else {
    t.rows = grow_rows<BigInt>(n_max, source);
  }
  return t;
}

SignedTriangle grow_triangle(std::int64_t n_max, SeedStream& seed) {
  return grow_triangle(n_max, SignSource([&seed] { return seed.next_sign(); }));
}

std::int64_t triangle_entry(std::int64_t n, std::int64_t k, SeedStream& seed) {
  if (n < 0 || k < 0 || k > n) throw InvalidParameter("triangle_entry: need 0 <= k <= n");
  if (n > 62) throw InvalidParameter("triangle_entry: n too large for 64-bit entries");
  // Same consumption order as grow_triangle, so the value matches its row n.
  const auto rows = grow_rows<std::int64_t>(n, [&seed] { return seed.next_sign(); });
  return rows[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
}

BigInt binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  BigInt c = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    c *= n - k + i;
    c /= i;
  }
  return c;
}

bool CentralStatistics::mean_ok(double z) const noexcept { return std::abs(mean) <= z * mean_se; }
bool CentralStatistics::variance_ok(double z) const noexcept {
  return std::abs(variance - expected_variance) <= z * variance_se;
}

bool SecondMomentCell::ok(double z) const noexcept { return std::abs(second - expected) <= z * standard_error; }

CentralStatistics central_statistics(std::int64_t n, std::size_t trials, const SeedStream& seed, unsigned jobs) {
  if (n < 0 || 2 * n > 62) throw InvalidParameter("central_statistics: need 0 <= n <= 31");
  if (trials < kMinPascalTrials) {
    throw InvalidParameter("central_statistics: need at least " + std::to_string(kMinPascalTrials) + " trials");
  }
  std::vector<std::int64_t> values(trials);
  parallel_for(trials, jobs, [&](std::size_t t) {
    SeedStream s = seed.derive(t);
    values[t] = triangle_entry(2 * n, n, s);
  });

  CentralStatistics st;
  st.n = n;
  st.trials = trials;
  st.expected_variance = binomial(2 * n, n).convert_to<double>();
  double s1 = 0, s2 = 0, s4 = 0, s6 = 0;
  for (const auto v : values) {
    const double x = static_cast<double>(v);
    const double x2 = x * x;
    s1 += x;
    s2 += x2;
    s4 += x2 * x2;
    s6 += x2 * x2 * x2;
    ++st.histogram[v];
  }
  const double T = static_cast<double>(trials);
  st.mean = s1 / T;
  st.variance = s2 / T;
  st.mean_se = std::sqrt(std::max(0.0, st.variance - st.mean * st.mean) / (T - 1));
  st.variance_se = std::sqrt(std::max(0.0, s4 / T - st.variance * st.variance) / (T - 1));
  if (st.variance > 0) {
    st.kurtosis = (s4 / T) / (st.variance * st.variance);
    st.sixth = (s6 / T) / (st.variance * st.variance * st.variance);
  }
  return st;
}

std::vector<SecondMomentCell> second_moment_grid(std::int64_t n_max, std::size_t trials, const SeedStream& seed,
                                                 unsigned jobs) {
  if (n_max < 0 || n_max > 62) throw InvalidParameter("second_moment_grid: need 0 <= n_max <= 62");
  if (trials < 2) throw InvalidParameter("second_moment_grid: need at least 2 trials");
  const std::size_t cells = static_cast<std::size_t>((n_max + 1) * (n_max + 2) / 2);
  std::vector<std::vector<double>> sq(trials, std::vector<double>(cells));
  parallel_for(trials, jobs, [&](std::size_t t) {
    SeedStream s = seed.derive(t);
    const auto rows = grow_rows<std::int64_t>(n_max, [&s] { return s.next_sign(); });
    std::size_t c = 0;
    for (const auto& row : rows) {
      for (const auto v : row) {
        const double x = static_cast<double>(v);
        sq[t][c++] = x * x;
      }
    }
  });

  std::vector<SecondMomentCell> grid;
  grid.reserve(cells);
  const double T = static_cast<double>(trials);
  std::size_t c = 0;
  for (std::int64_t n = 0; n <= n_max; ++n) {
    for (std::int64_t k = 0; k <= n; ++k, ++c) {
      double s2 = 0, s4 = 0;
      for (std::size_t t = 0; t < trials; ++t) {
        s2 += sq[t][c];
        s4 += sq[t][c] * sq[t][c];
      }
      SecondMomentCell cell;
      cell.n = n;
      cell.k = k;
      cell.second = s2 / T;
      cell.standard_error = std::sqrt(std::max(0.0, s4 / T - cell.second * cell.second) / (T - 1));
      cell.expected = binomial(n, k).convert_to<double>();
      grid.push_back(cell);
    }
  }
  return grid;
}

}  // namespace kwise
