#pragma once

#include <cmath>
#include <cstdint>
#include <list>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cachecast/trace.hpp"

namespace cachecast {

struct NodeSpec {
  std::string node_id;
  std::uint64_t capacity_bytes = 0;
  double high_watermark = 0.95;
  double low_watermark = 0.90;

  bool operator==(const NodeSpec&) const = default;
};

inline void validate_node_spec(const NodeSpec& spec) {
  if (spec.node_id.empty())
    throw std::invalid_argument("node_id must be non-empty");
  if (spec.capacity_bytes == 0)
    throw std::invalid_argument("capacity_bytes must be positive: " +
                                spec.node_id);
  if (!(spec.high_watermark > 0.0 && spec.high_watermark <= 1.0))
    throw std::invalid_argument("high_watermark must be in (0,1]: " +
                                spec.node_id);
  if (!(spec.low_watermark > 0.0 && spec.low_watermark <= spec.high_watermark))
    throw std::invalid_argument("low_watermark must be in (0,high_watermark]: " +
                                spec.node_id);
}

// Raised by evict_and_admit for files exceeding the low-watermark budget.
// Signals a served-through (uncached) transfer, not a failure.
struct UnadmissibleSize : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Single cache node: LRU residency with high/low watermark eviction. An
// admission that would push usage above high_watermark x capacity first
// evicts LRU entries until usage lands at or below low_watermark x capacity.
class CacheNode {
 public:
  explicit CacheNode(NodeSpec spec) : spec_(std::move(spec)) {
    validate_node_spec(spec_);
    high_limit_ = threshold_bytes(spec_.high_watermark);
    low_limit_ = threshold_bytes(spec_.low_watermark);
  }

  const NodeSpec& spec() const { return spec_; }
  std::uint64_t used_bytes() const { return used_bytes_; }
  std::size_t resident_count() const { return index_.size(); }

  bool contains(const std::string& file_id) const {
    return index_.find(file_id) != index_.end();
  }

  Outcome lookup_and_touch(const std::string& file_id) {
    auto it = index_.find(file_id);
    if (it == index_.end()) return Outcome::Miss;
    lru_.splice(lru_.begin(), lru_, it->second);
    return Outcome::Hit;
  }

  bool admissible(std::uint64_t size_bytes) const {
    return size_bytes >= 1 && size_bytes <= low_limit_;
  }

  std::vector<std::string> evict_and_admit(const std::string& file_id,
                                           std::uint64_t size_bytes) {
    if (!admissible(size_bytes))
      throw UnadmissibleSize(file_id + " (" + std::to_string(size_bytes) +
                             " bytes) exceeds low-watermark budget of " +
                             spec_.node_id);
    if (contains(file_id))
      throw std::logic_error("evict_and_admit on resident file " + file_id);

    std::vector<std::string> evicted;
    if (used_bytes_ + size_bytes > high_limit_) {
      while (used_bytes_ + size_bytes > low_limit_) {
        auto& victim = lru_.back();
        used_bytes_ -= victim.second;
        evicted.push_back(std::move(victim.first));
        index_.erase(evicted.back());
        lru_.pop_back();
      }
    }
    lru_.emplace_front(file_id, size_bytes);
    index_.emplace(file_id, lru_.begin());
    used_bytes_ += size_bytes;
    return evicted;
  }

 private:
  // Thresholds are evaluated against integral byte counts, so flooring the
  // real-valued watermark keeps the comparisons exact.
  std::uint64_t threshold_bytes(double watermark) const {
    return static_cast<std::uint64_t>(
        std::floor(watermark * static_cast<double>(spec_.capacity_bytes)));
  }

  NodeSpec spec_;
  std::uint64_t high_limit_ = 0;
  std::uint64_t low_limit_ = 0;
  std::uint64_t used_bytes_ = 0;
  std::list<std::pair<std::string, std::uint64_t>> lru_;
  std::unordered_map<std::string,
                     std::list<std::pair<std::string, std::uint64_t>>::iterator>
      index_;
};

}  // namespace cachecast
