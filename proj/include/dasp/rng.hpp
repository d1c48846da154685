// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace dasp {

/// Seedable counter-based generator (splitmix64 core). All stochastic ops in
/// the library take one of these explicitly; there is no global RNG state.
///
/// Stream fan-out: a root seed is split into independent streams with
/// Rng::stream(root, tag, index). The tag is FNV-1a hashed, the index covers
/// per-clip / per-batch parallel work, and the mix is one extra splitmix64
/// round, so streams never overlap for distinct (tag, index) pairs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x9e3779b97f4a7c15ull) : state_(seed) {
    // Warm up so that small seeds do not produce small first outputs.
    next_u64();
    next_u64();
  }

  static std::uint64_t fnv1a(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : tag) {
      h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
      h *= 0x100000001b3ull;
    }
    return h;
  }

  static Rng stream(std::uint64_t root, std::string_view tag,
                    std::uint64_t index = 0) {
    std::uint64_t s = mix(root ^ fnv1a(tag));
    s = mix(s + 0x9e3779b97f4a7c15ull * (index + 1));
    return Rng(s);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n) {
    // Rejection-free modulo is fine at our scales; bias < 2^-64 * n.
    return next_u64() % n;
  }

  /// Standard normal via Box-Muller (portable across platforms, unlike
  /// std::normal_distribution).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dasp
