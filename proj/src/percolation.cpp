#include "kwise/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kwise {

namespace {

void check_side(std::int64_t n) {
  if (n < 2) throw InvalidParameter("percolation: n must be at least 2");
  if (n > 4096) throw InvalidParameter("percolation: n too large");
}

void check_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidParameter("percolation: p must lie in (0,1)");
}

}  // namespace

std::size_t bonds_per_box(std::int64_t n) {
  check_side(n);
  return static_cast<std::size_t>(2 * n * (n - 1));
}

std::size_t horizontal_bond(std::int64_t n, std::int64_t r, std::int64_t c) {
  return static_cast<std::size_t>(r * (n - 1) + c);
}

std::size_t vertical_bond(std::int64_t n, std::int64_t r, std::int64_t c) {
  return static_cast<std::size_t>(n * (n - 1) + r * n + c);
}

bool has_crossing(std::span<const std::uint8_t> bonds, std::int64_t n, Direction direction) {
  if (bonds.size() != bonds_per_box(n)) throw InvalidParameter("has_crossing: wrong bond count");
  const auto N = static_cast<std::size_t>(n);
  const std::size_t source = N * N, sink = N * N + 1;
  UnionFind uf(N * N + 2);
  auto vertex = [N](std::int64_t r, std::int64_t c) { return static_cast<std::size_t>(r) * N + static_cast<std::size_t>(c); };
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t c = 0; c < n; ++c) {
      if (c + 1 < n && bonds[horizontal_bond(n, r, c)]) uf.unite(vertex(r, c), vertex(r, c + 1));
      if (r + 1 < n && bonds[vertical_bond(n, r, c)]) uf.unite(vertex(r, c), vertex(r + 1, c));
    }
  }
  for (std::int64_t i = 0; i < n; ++i) {
    if (direction == Direction::Narrow) {
      uf.unite(source, vertex(0, i));
      uf.unite(sink, vertex(n - 1, i));
    } else {
      uf.unite(source, vertex(i, 0));
      uf.unite(sink, vertex(i, n - 1));
    }
  }
  return uf.connected(source, sink);
}

std::span<const std::uint8_t> BondConfig::box(int b) const {
  const auto per = bonds_per_box(n);
  return std::span<const std::uint8_t>(bonds).subspan(static_cast<std::size_t>(b) * per, per);
}

int BondConfig::crossing_count() const noexcept {
  return static_cast<int>(std::count(box_crossings.begin(), box_crossings.end(), std::uint8_t{1}));
}

bool full_box_crossing(const BondConfig& config) {
  const std::int64_t n = config.n;
  const std::int64_t width = n * config.boxes();
  const auto W = static_cast<std::size_t>(width);
  const std::size_t cells = static_cast<std::size_t>(n) * W;
  const std::size_t source = cells, sink = cells + 1;
  UnionFind uf(cells + 2);
  auto vertex = [W](std::int64_t r, std::int64_t c) { return static_cast<std::size_t>(r) * W + static_cast<std::size_t>(c); };
  for (int b = 0; b < config.boxes(); ++b) {
    const auto bonds = config.box(b);
    const std::int64_t offset = b * n;
    for (std::int64_t r = 0; r < n; ++r) {
      for (std::int64_t c = 0; c < n; ++c) {
        if (c + 1 < n && bonds[horizontal_bond(n, r, c)]) uf.unite(vertex(r, offset + c), vertex(r, offset + c + 1));
        if (r + 1 < n && bonds[vertical_bond(n, r, c)]) uf.unite(vertex(r, offset + c), vertex(r + 1, offset + c));
      }
    }
  }
  for (std::int64_t c = 0; c < width; ++c) {
    uf.unite(source, vertex(0, c));
    uf.unite(sink, vertex(n - 1, c));
  }
  return uf.connected(source, sink);
}

std::vector<std::uint8_t> sample_box(std::int64_t n, double p, SeedStream& seed) {
  std::vector<std::uint8_t> bonds(bonds_per_box(n));
  for (auto& b : bonds) b = seed.bernoulli(p) ? 1 : 0;
  return bonds;
}

BondConfig sample_conditioned(std::int64_t n, int k, double p, SeedStream& seed) {
  check_side(n);
  check_probability(p);
  if (k < 1) throw InvalidParameter("sample_conditioned: k must be at least 1");
  BondConfig config;
  config.n = n;
  config.k = k;
  config.p = p;
  const auto per = bonds_per_box(n);
  config.bonds.resize(per * static_cast<std::size_t>(k + 1));
  config.box_crossings.resize(static_cast<std::size_t>(k + 1));
  for (std::uint64_t attempt = 0;; ++attempt) {
    if (attempt > kPercolationRestartBudget) throw BudgetExceeded("sample_conditioned: restart budget exhausted");
    int count = 0;
    for (int b = 0; b <= k; ++b) {
      auto box = std::span<std::uint8_t>(config.bonds).subspan(static_cast<std::size_t>(b) * per, per);
      for (auto& bond : box) bond = seed.bernoulli(p) ? 1 : 0;
      const bool crosses = has_crossing(box, n, Direction::Narrow);
      config.box_crossings[static_cast<std::size_t>(b)] = crosses;
      count += crosses;
    }
    if (count % 2 == 1) {
      config.restarts = attempt;
      return config;
    }
  }
}

std::vector<IndexTuple> spanning_bond_tuples(std::int64_t n, int k, std::size_t count, std::uint64_t seed) {
  const auto per = bonds_per_box(n);
  if (k < 1) throw InvalidParameter("spanning_bond_tuples: k must be at least 1");
  SeedStream s(seed);
  std::vector<IndexTuple> tuples;
  tuples.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    const auto free_box = static_cast<int>(s.below(static_cast<std::uint64_t>(k + 1)));
    IndexTuple tuple;
    for (int b = 0; b <= k; ++b) {
      if (b == free_box) continue;
      tuple.push_back(static_cast<std::int64_t>(static_cast<std::size_t>(b) * per + s.below(per)) + 1);
    }
    tuples.push_back(std::move(tuple));
  }
  return tuples;
}

namespace {

BinarySampler bond_sampler(std::int64_t n, int k, double p) {
  return [n, k, p](SeedStream& s, std::size_t) { return sample_conditioned(n, k, p, s).bonds; };
}

}  // namespace

BondReport verify_bond_kwise(const BondTestConfig& config, std::span<const IndexTuple> tuples) {
  check_side(config.n);
  check_probability(config.p);
  const auto total_bonds = static_cast<std::int64_t>(bonds_per_box(config.n) * static_cast<std::size_t>(config.k + 1));
  for (const auto& t : tuples) {
    if (t.empty() || static_cast<int>(t.size()) > config.k) {
      throw InvalidParameter("verify_bond_kwise: tuples must have 1..k bonds");
    }
    for (const auto i : t) {
      if (i < 1 || i > total_bonds) throw InvalidParameter("verify_bond_kwise: bond index out of range");
    }
  }
  ChiSquareConfig cs;
  cs.k = config.k;
  cs.trials = config.trials;
  cs.alpha = config.alpha;
  cs.trial_seed = config.trial_seed;
  cs.one_probability = config.p;
  cs.jobs = config.jobs;
  const auto sampler = bond_sampler(config.n, config.k, config.p);

  BondReport report;
  report.tuples = chi_square_tuples(sampler, tuples, cs, "bond tuples");

  std::vector<std::int64_t> bonds;
  for (const auto& t : tuples) bonds.insert(bonds.end(), t.begin(), t.end());
  std::sort(bonds.begin(), bonds.end());
  bonds.erase(std::unique(bonds.begin(), bonds.end()), bonds.end());
  std::vector<IndexTuple> singles;
  for (const auto b : bonds) singles.push_back({b});
  const auto tables = sample_joint_tables(sampler, singles, config.trials, config.trial_seed, config.jobs);
  report.marginal_threshold = bonferroni_z(3.0, bonds.size());
  const double T = static_cast<double>(config.trials);
  const double se = std::sqrt(config.p * (1 - config.p) / T);
  for (const auto& table : tables) {
    BondMarginal m;
    m.bond = table.indices[0];
    m.frequency = static_cast<double>(table.counts[1]) / T;
    m.z = (m.frequency - config.p) / se;
    if (std::abs(m.z) > report.marginal_threshold) report.marginals_ok = false;
    report.marginals.push_back(m);
  }
  report.passed = report.tuples.passed && report.marginals_ok;
  return report;
}

BondReport verify_bond_kwise(const BondTestConfig& config) {
  const auto tuples = spanning_bond_tuples(config.n, config.k, config.num_tuples, config.tuple_seed);
  return verify_bond_kwise(config, tuples);
}

IndependenceReport probe_crossing_indicators(const BondTestConfig& config, int boxes) {
  if (boxes < 1 || boxes > config.k + 1) throw InvalidParameter("probe_crossing_indicators: boxes out of range");
  const BinarySampler sampler = [&config](SeedStream& s, std::size_t) {
    return sample_conditioned(config.n, config.k, config.p, s).box_crossings;
  };
  IndexTuple tuple(static_cast<std::size_t>(boxes));
  std::iota(tuple.begin(), tuple.end(), 1);
  const std::vector<IndexTuple> tuples{tuple};
  const auto tables = sample_joint_tables(sampler, tuples, config.trials, config.trial_seed, config.jobs);

  // Pooled marginal over all k+1 boxes.
  std::vector<IndexTuple> singles;
  for (int b = 1; b <= config.k + 1; ++b) singles.push_back({b});
  const auto marginal = sample_joint_tables(sampler, singles, config.trials, config.trial_seed, config.jobs);
  double ones = 0;
  for (const auto& t : marginal) ones += static_cast<double>(t.counts[1]);
  const double q = ones / (static_cast<double>(config.trials) * (config.k + 1));

  IndependenceReport report;
  report.mode = TestMode::MonteCarlo;
  report.subject = "crossing indicators";
  report.tuples_tested = 1;
  report.sample_size = config.trials;
  report.alpha = config.alpha;
  Violation v;
  v.indices = tuple;
  v.observed = tables[0].counts;
  v.expected = product_law_counts(boxes, q, config.trials);
  v.statistic = chi_square_statistic(v.observed, v.expected);
  v.p_value = chi_square_upper_tail(v.statistic, static_cast<double>((std::size_t{1} << boxes) - 1));
  report.max_statistic = v.statistic;
  report.min_p_value = v.p_value;
  if (v.p_value < config.alpha) {
    report.passed = false;
    report.violation_count = 1;
    report.violations.push_back(std::move(v));
  }
  return report;
}

double exact_crossing_probability(std::int64_t n, double p) {
  check_side(n);
  if (n > 4) throw InvalidParameter("exact_crossing_probability: n <= 4");
  const auto per = bonds_per_box(n);
  std::vector<std::uint8_t> bonds(per);
  double total = 0.0;
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << per); ++code) {
    int open = 0;
    for (std::size_t i = 0; i < per; ++i) {
      bonds[i] = (code >> i) & 1U;
      open += bonds[i];
    }
    if (has_crossing(bonds, n, Direction::Narrow)) {
      total += std::pow(p, open) * std::pow(1 - p, static_cast<double>(per) - open);
    }
  }
  return total;
}

}  // namespace kwise
