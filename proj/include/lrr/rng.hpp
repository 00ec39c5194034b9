#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string_view>

#include "lrr/common.hpp"

namespace lrr {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

// Seed-splitting rule used everywhere in the artifact:
//   child_seed = splitmix64( splitmix64(parent_seed ^ fnv1a64(name)) + index )
// Distinct (name, index) pairs give statistically independent streams, so
// toggling one consumer of randomness does not perturb the draws of another.
inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view name,
                                 std::uint64_t index = 0) {
  return detail::splitmix64(detail::splitmix64(parent ^ detail::fnv1a64(name)) + index);
}

// Deterministic random stream: mt19937_64 core (bit-exact across platforms)
// with explicit Box-Muller normals so the draw sequence is fully specified
// by this header rather than by the standard library's distributions.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), gen_(detail::splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; the spare value is cached, so a stream
  // consumes one uniform pair per two normals.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Uniform integer in [0, n); rejection sampling, no modulo bias.
  int uniform_int(int n) {
    if (n <= 0) throw DomainError("uniform_int: n must be positive");
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % un;
    std::uint64_t r = next_u64();
    while (r >= limit) r = next_u64();
    return static_cast<int>(r % un);
  }

  RngStream substream(std::string_view name, std::uint64_t index = 0) const {
    return RngStream(derive_seed(seed_, name, index));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lrr
