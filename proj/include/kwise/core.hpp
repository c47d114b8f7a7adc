#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kwise {

class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a rejection loop or enumeration exceeds its work budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Sign = std::int8_t;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based stream of fair ±1 values (plus a few derived draws).
//
// Word c of the stream is mix64(key + (c + 1) * golden), so the stream is a
// pure function of its key and any substream obtained through derive() can be
// consumed independently of its parent.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed) noexcept : seed_(seed), key_(mix64(seed ^ kSeedSalt)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  // Number of ±1 values consumed so far.
  std::uint64_t position() const noexcept { return position_; }

  Sign next_sign() noexcept {
    if (bits_left_ == 0) {
      bits_ = next_word();
      bits_left_ = 64;
    }
    const Sign s = (bits_ & 1U) ? Sign{-1} : Sign{1};
    bits_ >>= 1;
    --bits_left_;
    ++position_;
    return s;
  }

  void fill_signs(std::span<Sign> out) noexcept {
    for (auto& s : out) s = next_sign();
  }

  // Full-width draws never share a word with sign draws.
  std::uint64_t next_u64() noexcept { return next_word(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double next_unit() noexcept { return static_cast<double>(next_word() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) noexcept { return next_unit() < p; }

  // Uniform on {0, ..., n-1}; n > 0.
  std::uint64_t below(std::uint64_t n) noexcept;

  // Independent substream keyed by (this stream's key, tag). Does not advance
  // this stream.
  SeedStream derive(std::uint64_t tag) const noexcept {
    SeedStream child(0);
    child.seed_ = seed_;
    child.key_ = mix64(key_ ^ mix64(tag * kGolden + kDeriveSalt));
    return child;
  }
  SeedStream derive(std::uint64_t tag1, std::uint64_t tag2) const noexcept {
    return derive(tag1).derive(tag2);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSeedSalt = 0x6A09E667F3BCC908ULL;
  static constexpr std::uint64_t kDeriveSalt = 0xBB67AE8584CAA73BULL;

  std::uint64_t next_word() noexcept { return mix64(key_ + (++counter_) * kGolden); }

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::uint64_t bits_ = 0;
  unsigned bits_left_ = 0;
  std::uint64_t position_ = 0;
};

enum class Construction { Iid, Gray, M4Block, ModmGeneral };

std::string_view to_string(Construction c) noexcept;

struct ConstructionParams {
  std::optional<int> k;
  std::optional<int> m;
  std::optional<double> epsilon;
  std::optional<std::int64_t> L;
};

// A finite prefix of a constructed ±1 sequence. values[0] is X_1.
struct SignSequence {
  std::vector<Sign> values;
  Construction construction = Construction::Iid;
  ConstructionParams params;

  std::size_t size() const noexcept { return values.size(); }
  // 1-based access matching X_i.
  Sign at(std::size_t i) const { return values.at(i - 1); }
};

// Throws InvalidParameter unless every value is ±1.
void check_signs(std::span<const Sign> values);

// Partial sums S_1..S_n of a ±1 sequence, with an optional reduced track.
struct WalkPath {
  std::int64_t first_time = 1;  // time index of sums[0]
  std::vector<std::int64_t> sums;
  std::optional<std::int64_t> modulus;
  std::vector<std::int64_t> reduced;  // sums mod modulus in [0, modulus); empty without modulus
  std::vector<std::int64_t> checkpoints;

  std::size_t size() const noexcept { return sums.size(); }
  std::int64_t at_time(std::int64_t n) const { return sums.at(static_cast<std::size_t>(n - first_time)); }
};

// Non-negative residue of a mod m, m > 0.
constexpr std::int64_t mod_floor(std::int64_t a, std::int64_t m) noexcept {
  const std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

WalkPath accumulate_walk(std::span<const Sign> xs, std::optional<std::int64_t> modulus = std::nullopt);
inline WalkPath accumulate_walk(const SignSequence& xs, std::optional<std::int64_t> modulus = std::nullopt) {
  return accumulate_walk(std::span<const Sign>(xs.values), modulus);
}

// I.i.d. fair signs X_1..X_n drawn from the stream.
SignSequence iid_sequence(std::size_t n, SeedStream& stream);

}  // namespace kwise
