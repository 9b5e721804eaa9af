#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace lungbench {

// splitmix64 finalizer: a bijective 64-bit mixing function.
constexpr std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds values into one seed; order matters.
constexpr std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b) {
  return SplitMix64(a ^ SplitMix64(b));
}
constexpr std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b,
                                std::uint64_t c) {
  return MixSeed(MixSeed(a, b), c);
}

// 64-bit FNV-1a.
constexpr std::uint64_t Fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic generator with portable uniform draws. std::mt19937_64 is
// fully specified by the standard; the distributions in <random> are not,
// so conversions to double are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(SplitMix64(seed)) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double Uniform(double low, double high) {
    return low + (high - low) * Uniform();
  }
  // Uniform integer in [0, n); n > 0.
  std::uint64_t Below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }
  // Standard normal via Box-Muller.
  double Normal();

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline double Rng::Normal() {
  double u1 = Uniform();
  while (u1 <= 0.0) u1 = Uniform();
  const double u2 = Uniform();
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

}  // namespace lungbench
