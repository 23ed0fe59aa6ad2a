#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

// Seeded 64-bit hashing with a fixed, platform-independent definition.
// std::hash is deliberately not used anywhere a hash value reaches disk or
// decides dataset membership.

namespace mave {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// FNV-1a over the fields with a 0x1F separator between them, folded with the
/// seed. The separator keeps ("ab","c") and ("a","bc") distinct.
inline std::uint64_t stable_hash(std::uint64_t seed,
                                 std::initializer_list<std::string_view> fields) {
  std::uint64_t h = 14695981039346656037ull ^ splitmix64(seed);
  for (const auto& f : fields) {
    for (const unsigned char c : f) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0x1F;
    h *= 1099511628211ull;
  }
  return splitmix64(h);
}

/// Maps a hash to [0, 1) with 53 bits of precision.
inline double unit_interval(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace mave
