#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cachecast/hash.hpp"

namespace cachecast {

// Capacity-weighted rendezvous hashing. Each candidate scores a key with
//   score = -weight / ln(u),  u = hash(key, node) mapped into (0, 1),
// and the highest score wins. A node with twice the weight owns twice the
// keyspace in expectation, and removing a node only reassigns the keys it
// owned.
namespace rendezvous {

inline constexpr std::uint64_t kSaltA = 0x9e3779b97f4a7c15ull;

// Maps a 64-bit hash into (0, 1). Zero is remapped away so ln(u) is finite.
inline double unit_open(std::uint64_t h) {
  constexpr double kInv = 1.0 / 18446744073709551616.0;  // 2^-64
  double u = (static_cast<double>(h) + 0.5) * kInv;
  if (u >= 1.0) u = std::nextafter(1.0, 0.0);
  return u;
}

inline double score(std::string_view key, std::string_view node_id,
                    double weight) {
  if (!(weight > 0.0))
    throw std::invalid_argument("rendezvous weight must be > 0");
  std::uint64_t h = murmur64a(key, kSaltA);
  h = murmur64a(node_id, h);
  const double u = unit_open(h);
  return -weight / std::log(u);
}

struct Candidate {
  std::string node_id;
  double weight = 1.0;
};

// Returns the index of the winning candidate, breaking exact score ties by
// lexicographically smallest node_id so selection is total and deterministic.
inline std::size_t select(std::string_view key,
                          std::span<const Candidate> candidates) {
  if (candidates.empty())
    throw std::invalid_argument("rendezvous requires at least one candidate");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double s = score(key, candidates[i].node_id, candidates[i].weight);
    if (s > best_score ||
        (s == best_score && candidates[i].node_id < candidates[best].node_id)) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

}  // namespace rendezvous

}  // namespace cachecast
