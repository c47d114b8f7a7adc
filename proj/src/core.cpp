#include "kwise/core.hpp"

#include <string>

namespace kwise {

std::uint64_t SeedStream::below(std::uint64_t n) noexcept {
  // Lemire's multiply-shift with rejection of the biased low range.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const unsigned __int128 product = static_cast<unsigned __int128>(next_word()) * n;
    if (static_cast<std::uint64_t>(product) >= threshold) {
      return static_cast<std::uint64_t>(product >> 64);
    }
  }
}

std::string_view to_string(Construction c) noexcept {
  switch (c) {
    case Construction::Iid:
      return "iid";
    case Construction::Gray:
      return "gray";
    case Construction::M4Block:
      return "m4";
    case Construction::ModmGeneral:
      return "modm";
  }
  return "unknown";
}

void check_signs(std::span<const Sign> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 1 && values[i] != -1) {
      throw InvalidParameter("value at position " + std::to_string(i + 1) + " is not a sign");
    }
  }
}

WalkPath accumulate_walk(std::span<const Sign> xs, std::optional<std::int64_t> modulus) {
  if (xs.empty()) throw InvalidParameter("accumulate_walk: empty sequence");
  if (modulus && *modulus <= 0) throw InvalidParameter("accumulate_walk: modulus must be positive");
  check_signs(xs);

  WalkPath path;
  path.modulus = modulus;
  path.sums.reserve(xs.size());
  std::int64_t s = 0;
  for (const Sign x : xs) {
    s += x;
    path.sums.push_back(s);
  }
  if (modulus) {
    path.reduced.reserve(xs.size());
    for (const auto v : path.sums) path.reduced.push_back(mod_floor(v, *modulus));
  }
  return path;
}

SignSequence iid_sequence(std::size_t n, SeedStream& stream) {
  SignSequence seq;
  seq.construction = Construction::Iid;
  seq.values.resize(n);
  stream.fill_signs(seq.values);
  return seq;
}

}  // namespace kwise
