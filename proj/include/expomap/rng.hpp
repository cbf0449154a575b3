#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace expomap {

// All randomness in the library goes through these helpers. std::mt19937_64
// has a standard-mandated bit sequence, and the mapping functions below avoid
// std::*_distribution, whose outputs vary across standard library
// implementations. Same seed, same stream, everywhere.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Distinct deterministic sub-streams from one base seed ("sensors", "init", ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(base ^ h);
}

// Uniform in [0, 1), 53-bit resolution.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform in (0, 1), endpoints excluded.
inline double uniform_open01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Uniform in [-a, a].
inline double uniform_symmetric(std::mt19937_64& rng, double a) {
  return (2.0 * uniform01(rng) - 1.0) * a;
}

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

}  // namespace expomap
