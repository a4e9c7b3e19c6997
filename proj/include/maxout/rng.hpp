#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace maxout {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a tuple of
/// counters (trial, layer, unit, feature, ...). The result depends only on the
/// values, never on the order in which streams are requested.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k + 0x3c6ef372fe94f82bULL));
  return h;
}

using Engine = std::mt19937_64;

inline Engine make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  return Engine(derive_seed(seed, keys));
}

}  // namespace maxout
