#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace vnca {

// Counter-based deterministic RNG. Every stream is a pure function of
// (seed, label, counter): the label partitions independent streams (weights,
// data shuffling, sampling, ...) and the counter is the only mutable state,
// so a stream can be checkpointed and resumed by storing a single integer.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view label, std::uint64_t counter = 0)
      : base_(mix(seed ^ fnv1a(label))), counter_(counter) {}

  std::uint64_t next_u64() {
    ++counter_;
    return mix(base_ + counter_ * 0x9E3779B97F4A7C15ull);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uint64_t span = std::uint64_t(hi - lo) + 1;
    // Lemire multiply-shift; bias is span / 2^64, far below test resolution.
    std::uint64_t r = std::uint64_t((__uint128_t(next_u64()) * span) >> 64);
    return lo + std::int64_t(r);
  }

  // Standard normal via Box-Muller. Deliberately no spare caching: each call
  // consumes exactly two raw draws, keeping the counter a complete
  // description of the stream state.
  float normal() {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    return float(r * std::cos(2.0 * std::numbers::pi * u2));
  }

  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t c) { counter_ = c; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ull;
    }
    return h;
  }

  std::uint64_t base_;
  std::uint64_t counter_;
};

}  // namespace vnca
