#pragma once

#include <cstdint>
#include <initializer_list>

namespace grapher {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a tuple of indices.
template <typename... Ts>
std::uint64_t mix_seed(std::uint64_t seed, Ts... parts) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t p : {static_cast<std::uint64_t>(parts)...}) h = splitmix64(h ^ p);
  return h;
}

}  // namespace grapher
