#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace rlsched {

// All randomness flows through this wrapper around std::mt19937_64 so streams
// are reproducible bit-for-bit for a given seed. The mappings from raw 64-bit
// draws to distributions are fixed here instead of using std::*_distribution,
// whose algorithms differ between standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer on [lo, hi], both inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<double>(hi - lo) + 1.0;
    auto offset = static_cast<std::int64_t>(uniform01() * span);
    if (offset > hi - lo) offset = hi - lo;
    return lo + offset;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Rayleigh(sigma) via inverse CDF: sigma * sqrt(-2 ln(1 - U)).
  double rayleigh(double sigma) {
    return sigma * std::sqrt(-2.0 * std::log1p(-uniform01()));
  }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; derives independent stream seeds from a base seed.
inline std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// FNV-1a, used to give each named run its own seed domain.
inline std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace rlsched
