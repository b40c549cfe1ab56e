#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace specseek {

// Deterministic random stream. The engine is mt19937_64 (its output sequence
// is pinned by the standard); all distributions are hand-rolled so draws do
// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }

  // Derives an independent stream from this one's seed and a salt.
  // Does not consume state of the parent stream.
  Rng spawn(uint64_t salt) const {
    return Rng(split_mix(seed_ + 0x9E3779B97F4A7C15ull * (salt + 1)));
  }

  uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n), bias-free via rejection.
  uint64_t uniform_int(uint64_t n) {
    const uint64_t rem = (UINT64_MAX % n + 1) % n;
    const uint64_t max_ok = UINT64_MAX - rem;
    uint64_t x = next_u64();
    while (x > max_ok) x = next_u64();
    return x % n;
  }

  // Standard normal via Box-Muller; the second deviate is cached.
  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 =
        static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double angle = 2.0 * std::numbers::pi * uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static uint64_t split_mix(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace specseek
