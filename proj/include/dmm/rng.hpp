#pragma once

// Deterministic random streams shared by every module.
//
// All draws go through std::mt19937_64 (whose output sequence is fixed by the
// standard) or through a counter-based splitmix64 hash. The conversions to
// uniform/normal variates are done here rather than with <random>
// distributions, whose algorithms are implementation-defined.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace dmm::rng {

using Engine = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed from a parent seed and a sequence of keys.
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t a) noexcept {
  return mix64(mix64(seed) ^ (a * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
}
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return derive(derive(seed, a), b);
}
constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                               std::uint64_t c) noexcept {
  return derive(derive(derive(seed, a), b), c);
}

/// Uniform in [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double uniform01(Engine& eng) { return to_unit(eng()); }

/// Uniform integer in [0, bound) by rejection; bound > 0.
inline std::uint64_t below(Engine& eng, std::uint64_t bound) {
  const std::uint64_t limit = bound * (UINT64_MAX / bound);
  std::uint64_t x = eng();
  while (x >= limit) x = eng();
  return x % bound;
}

/// Standard normal from two uniforms (Box-Muller, cosine branch).
inline double normal_from(std::uint64_t bits1, std::uint64_t bits2) noexcept {
  const double u1 = 1.0 - to_unit(bits1);  // (0, 1]
  const double u2 = to_unit(bits2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double normal(Engine& eng) {
  const auto a = eng();
  const auto b = eng();
  return normal_from(a, b);
}

}  // namespace dmm::rng
