#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>

namespace cachecast {

// MurmurHash64A. Stable across platforms; used for routing scores and
// per-file size derivation, never for untrusted input.
inline std::uint64_t murmur64a(const void* key, std::size_t len,
                               std::uint64_t seed) {
  const std::uint64_t m = 0xc6a4a7935bd1e995ULL;
  const int r = 47;
  std::uint64_t h = seed ^ (static_cast<std::uint64_t>(len) * m);

  const auto* data = static_cast<const unsigned char*>(key);
  const auto* end = data + (len / 8) * 8;

  while (data != end) {
    std::uint64_t k;
    std::memcpy(&k, data, 8);
    data += 8;
    k *= m;
    k ^= k >> r;
    k *= m;
    h ^= k;
    h *= m;
  }

  switch (len & 7) {
    case 7: h ^= static_cast<std::uint64_t>(data[6]) << 48; [[fallthrough]];
    case 6: h ^= static_cast<std::uint64_t>(data[5]) << 40; [[fallthrough]];
    case 5: h ^= static_cast<std::uint64_t>(data[4]) << 32; [[fallthrough]];
    case 4: h ^= static_cast<std::uint64_t>(data[3]) << 24; [[fallthrough]];
    case 3: h ^= static_cast<std::uint64_t>(data[2]) << 16; [[fallthrough]];
    case 2: h ^= static_cast<std::uint64_t>(data[1]) << 8; [[fallthrough]];
    case 1: h ^= static_cast<std::uint64_t>(data[0]); h *= m;
  }

  h ^= h >> r;
  h *= m;
  h ^= h >> r;
  return h;
}

inline std::uint64_t murmur64a(std::string_view s, std::uint64_t seed) {
  return murmur64a(s.data(), s.size(), seed);
}

// SplitMix64 finalizer; good bit mixing for combining hashes and seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

}  // namespace cachecast
