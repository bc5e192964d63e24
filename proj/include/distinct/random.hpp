#pragma once

// Seeded random streams. Distributions are implemented here rather than taken
// from <random> so that draws are identical across standard libraries.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace distinct {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over bytes, for mixing string identifiers into stream seeds.
std::uint64_t hash_string(std::string_view s);

/// Combine a root seed with stream coordinates (epoch, shape, purpose, ...).
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> parts);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (no cached second value).
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace distinct
