#pragma once

#include <cstdint>
#include <string_view>

namespace topeval {

/// 64-bit FNV-1a. Used for config hashes and per-item seed derivation, so the
/// value must be stable across platforms and releases.
constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for one unit of work (a document, a model) derived from a run seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view a,
                                 std::string_view b = {}) {
  std::uint64_t h = fnv1a64(a, splitmix64(base));
  h = fnv1a64("\x1f", h);
  h = fnv1a64(b, h);
  return splitmix64(h);
}

}  // namespace topeval
