#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sigsde {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of a named random stream: mix64(master ^ fnv1a(purpose)).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose) {
  return mix64(master ^ fnv1a(purpose));
}

/// Seed of the index-th sub-stream of a stream.
inline std::uint64_t derive_seed(std::uint64_t stream, std::uint64_t index) {
  return mix64(stream ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace sigsde
