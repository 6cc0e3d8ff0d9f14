#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "mutadelta/errors.hpp"

namespace mutadelta::numkit {

// Splittable counter-based generator (SplitMix64 output function).  The whole
// state is {key, counter}, so it serializes into checkpoints trivially and a
// restored stream continues bit-exactly.  split() derives an independent
// stream from a label without touching the parent's counter.
class Rng {
 public:
  Rng() = default;
  Rng(uint64_t key, uint64_t counter) : key_(key), counter_(counter) {}

  static Rng seeded(uint64_t seed) { return Rng(mix(seed ^ kGamma), 0); }

  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  uint64_t next_u64() {
    counter_ += 1;
    return mix(key_ + kGamma * counter_);
  }

  Rng split(uint64_t label) const {
    return Rng(mix(key_ ^ mix(label + kGamma)), 0);
  }

  Rng split(std::string_view label) const { return split(fnv1a(label)); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) throw contract_error("uniform_int: n must be positive");
    const uint64_t reject_above = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = next_u64();
    while (v >= reject_above) v = next_u64();
    return v % n;
  }

  // Box-Muller; draws two uniforms per sample so the stream stays stateless.
  double normal(double mean, double sd) {
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }
  void set_state(uint64_t key, uint64_t counter) {
    key_ = key;
    counter_ = counter;
  }

  static uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

 private:
  static constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

}  // namespace mutadelta::numkit
