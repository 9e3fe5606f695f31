#pragma once

#include <cstdint>
#include <string_view>

namespace pinnflow {

inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for a named consumer of a master seed. Adding a
/// new purpose never shifts the streams of existing ones.
inline std::uint64_t sub_seed(std::uint64_t seed, std::string_view purpose) {
  return splitmix64(fnv1a(purpose) ^ splitmix64(seed));
}

}  // namespace pinnflow
