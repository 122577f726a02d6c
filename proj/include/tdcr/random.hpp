#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace tdcr {

using Rng = std::mt19937_64;

// Deterministic per-component seed derived from one root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view component) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : component) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = root + 0x9e3779b97f4a7c15ull * (h | 1ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t root, std::string_view component) {
  return Rng(derive_seed(root, component));
}

// Uniform double in [0, 1) built from 53 random bits; unlike the standard distributions its
// output does not depend on the library implementation.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

// Box-Muller standard normal.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace tdcr
