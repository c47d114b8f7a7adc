#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "kwise/core.hpp"
#include "kwise/independence_lab.hpp"

namespace kwise {

// Disjoint-set forest with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) noexcept {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) noexcept {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }
  bool connected(std::size_t a, std::size_t b) noexcept { return find(a) == find(b); }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

// Bonds of an n x n vertex box (n rows, n columns). Horizontal bond (r, c)-(r, c+1)
// has index r(n-1) + c; vertical bond (r, c)-(r+1, c) has index n(n-1) + rn + c.
// Row 0 is the top.
std::size_t bonds_per_box(std::int64_t n);
std::size_t horizontal_bond(std::int64_t n, std::int64_t r, std::int64_t c);
std::size_t vertical_bond(std::int64_t n, std::int64_t r, std::int64_t c);

// Narrow: top row to bottom row. Wide: left column to right column.
enum class Direction { Narrow, Wide };

// Crossing of a single n x n box; bonds[i] != 0 means bond i is open.
bool has_crossing(std::span<const std::uint8_t> bonds, std::int64_t n, Direction direction);

// The k+1 boxes side by side form the n x n(k+1) box; no bonds join
// neighbouring boxes. Box b owns bonds [b * bonds_per_box, (b+1) * bonds_per_box).
struct BondConfig {
  std::int64_t n = 0;
  int k = 0;
  double p = 0.5;
  std::vector<std::uint8_t> bonds;
  std::vector<std::uint8_t> box_crossings;  // narrow crossing of each box
  std::uint64_t restarts = 0;

  int boxes() const noexcept { return k + 1; }
  std::span<const std::uint8_t> box(int b) const;
  int crossing_count() const noexcept;
};

// Narrow crossing of the whole n x n(k+1) box, computed on the full lattice.
bool full_box_crossing(const BondConfig& config);

inline constexpr std::uint64_t kPercolationRestartBudget = 100000;

// Fresh Bernoulli(p) bonds for every box, kept when an odd number of boxes
// cross. Throws BudgetExceeded after kPercolationRestartBudget rejections.
BondConfig sample_conditioned(std::int64_t n, int k, double p, SeedStream& seed);

// Unconditioned Bernoulli(p) bonds of one box.
std::vector<std::uint8_t> sample_box(std::int64_t n, double p, SeedStream& seed);

struct BondTestConfig {
  std::int64_t n = 4;
  int k = 2;
  double p = 0.5;
  std::size_t num_tuples = 50;
  std::size_t trials = 100000;
  double alpha = 0.01;
  std::uint64_t tuple_seed = 1;
  std::uint64_t trial_seed = 1;
  unsigned jobs = 1;
};

struct BondMarginal {
  std::int64_t bond = 0;  // 1-based global bond index
  double frequency = 0.0;
  double z = 0.0;
};

struct BondReport {
  IndependenceReport tuples;
  std::vector<BondMarginal> marginals;
  double marginal_threshold = 3.0;
  bool marginals_ok = true;
  bool passed = true;
};

// k bonds per tuple, one in each of k distinct boxes, leaving one box free.
std::vector<IndexTuple> spanning_bond_tuples(std::int64_t n, int k, std::size_t count, std::uint64_t seed);

// Chi-square of bond tuples against the product Bernoulli(p) law, and the
// marginal of every tested bond against p, the z threshold Bonferroni-scaled
// from 3 across the bonds tested.
BondReport verify_bond_kwise(const BondTestConfig& config);
BondReport verify_bond_kwise(const BondTestConfig& config, std::span<const IndexTuple> tuples);

// Joint law of the first `boxes` crossing indicators against independent
// indicators with the pooled empirical marginal. With boxes = k+1 the odd
// count constraint makes the table degenerate.
IndependenceReport probe_crossing_indicators(const BondTestConfig& config, int boxes);

// P(narrow crossing of one n x n box) by enumerating all configurations;
// n <= 4.
double exact_crossing_probability(std::int64_t n, double p);

}  // namespace kwise
