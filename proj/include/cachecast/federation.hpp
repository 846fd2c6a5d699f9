#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cachecast/cache_node.hpp"
#include "cachecast/config.hpp"

namespace cachecast {

enum class PolicyMode { Unified, Partitioned, Bypass };

inline const char* policy_mode_name(PolicyMode m) {
  switch (m) {
    case PolicyMode::Unified: return "unified";
    case PolicyMode::Partitioned: return "partitioned";
    default: return "bypass";
  }
}

inline std::optional<PolicyMode> policy_mode_from_name(std::string_view s) {
  if (s == "unified") return PolicyMode::Unified;
  if (s == "partitioned") return PolicyMode::Partitioned;
  if (s == "bypass") return PolicyMode::Bypass;
  return std::nullopt;
}

struct PolicySpec {
  PolicyMode mode = PolicyMode::Unified;
  // Partitioned only: which nodes serve which file class.
  std::map<std::string, std::set<std::string>> partition_map;
  bool allow_overlap = false;
  // Bypass only: requests of at least this size skip the cache entirely.
  std::uint64_t bypass_threshold_bytes = 0;

  bool operator==(const PolicySpec&) const = default;
};

// Rates are bytes per second; the saturating ramp gives an effective rate of
// r_max * size / (size + ramp_bytes), so ramp_bytes is the half-speed size.
struct ThroughputModelSpec {
  double wan_max_bps = 1.25e9;
  double lan_max_bps = 1.25e10;
  double ramp_bytes = 1e8;
  double jitter_lognorm_sigma = 0.25;

  bool operator==(const ThroughputModelSpec&) const = default;
};

struct FederationSpec {
  std::vector<NodeSpec> nodes;
  PolicySpec policy;
  ThroughputModelSpec throughput_model;
  std::uint64_t rng_seed = 0;

  bool operator==(const FederationSpec&) const = default;
};

inline void validate_federation(const FederationSpec& spec) {
  if (spec.nodes.empty())
    throw ConfigError("federation: nodes must be non-empty");
  std::set<std::string> ids;
  for (const auto& n : spec.nodes) {
    try {
      validate_node_spec(n);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("federation: ") + e.what());
    }
    if (!ids.insert(n.node_id).second)
      throw ConfigError("federation: duplicate node_id " + n.node_id);
  }

  const auto& tm = spec.throughput_model;
  if (!(tm.wan_max_bps > 0.0) || !(tm.lan_max_bps > 0.0))
    throw ConfigError("federation: throughput rates must be positive");
  if (tm.lan_max_bps < tm.wan_max_bps)
    throw ConfigError("federation: lan_max_bps must be >= wan_max_bps");
  if (!(tm.ramp_bytes > 0.0))
    throw ConfigError("federation: ramp_bytes must be positive");
  if (tm.jitter_lognorm_sigma < 0.0)
    throw ConfigError("federation: jitter_lognorm_sigma must be >= 0");

  const auto& p = spec.policy;
  if (p.mode == PolicyMode::Partitioned) {
    if (p.partition_map.empty())
      throw ConfigError("federation: partitioned policy needs a partition_map");
    std::set<std::string> seen;
    for (const auto& [cls, members] : p.partition_map) {
      if (members.empty())
        throw ConfigError("federation: partition for class '" + cls +
                          "' is empty");
      for (const auto& id : members) {
        if (!ids.count(id))
          throw ConfigError("federation: partition for class '" + cls +
                            "' names unknown node " + id);
        if (!p.allow_overlap && !seen.insert(id).second)
          throw ConfigError("federation: node " + id +
                            " appears in multiple partitions");
      }
    }
  }
  if (p.mode == PolicyMode::Bypass && p.bypass_threshold_bytes == 0)
    throw ConfigError("federation: bypass policy needs bypass_threshold_bytes");
}

// Default 24-node topology: eleven heterogeneous nodes linearly spaced from
// 96 TB to 388 TB, twelve 24 TB nodes, and one 44 TB node. Pass a divisor to
// shrink every capacity by a common factor for desk-scale runs.
inline FederationSpec default_federation(std::uint64_t capacity_divisor = 1) {
  if (capacity_divisor == 0)
    throw ConfigError("capacity_divisor must be positive");
  constexpr std::uint64_t kTb = 1'000'000'000'000ull;
  FederationSpec spec;
  for (int i = 0; i < 11; ++i) {
    NodeSpec n;
    char buf[16];
    std::snprintf(buf, sizeof buf, "site-a-%02d", i + 1);
    n.node_id = buf;
    n.capacity_bytes = (96 * kTb + static_cast<std::uint64_t>(i) *
                                       ((388 - 96) * kTb / 10)) /
                       capacity_divisor;
    spec.nodes.push_back(n);
  }
  for (int i = 0; i < 12; ++i) {
    NodeSpec n;
    char buf[16];
    std::snprintf(buf, sizeof buf, "site-b-%02d", i + 1);
    n.node_id = buf;
    n.capacity_bytes = 24 * kTb / capacity_divisor;
    spec.nodes.push_back(n);
  }
  NodeSpec big;
  big.node_id = "site-b-13";
  big.capacity_bytes = 44 * kTb / capacity_divisor;
  spec.nodes.push_back(big);
  return spec;
}

inline nlohmann::json federation_to_json(const FederationSpec& spec) {
  nlohmann::json j;
  j["rng_seed"] = spec.rng_seed;
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : spec.nodes) {
    j["nodes"].push_back({{"node_id", n.node_id},
                          {"capacity_bytes", n.capacity_bytes},
                          {"high_watermark", n.high_watermark},
                          {"low_watermark", n.low_watermark}});
  }
  nlohmann::json pol;
  pol["mode"] = policy_mode_name(spec.policy.mode);
  if (spec.policy.mode == PolicyMode::Partitioned) {
    nlohmann::json pm = nlohmann::json::object();
    for (const auto& [cls, members] : spec.policy.partition_map)
      pm[cls] = members;
    pol["partition_map"] = pm;
    pol["allow_overlap"] = spec.policy.allow_overlap;
  }
  if (spec.policy.mode == PolicyMode::Bypass)
    pol["bypass_threshold_bytes"] = spec.policy.bypass_threshold_bytes;
  j["policy"] = pol;
  j["throughput_model"] = {
      {"wan_max_bps", spec.throughput_model.wan_max_bps},
      {"lan_max_bps", spec.throughput_model.lan_max_bps},
      {"ramp_bytes", spec.throughput_model.ramp_bytes},
      {"jitter_lognorm_sigma", spec.throughput_model.jitter_lognorm_sigma}};
  return j;
}

inline FederationSpec federation_from_json(const nlohmann::json& j) {
  constexpr const char* ctx = "federation config";
  FederationSpec spec;
  spec.rng_seed = detail::json_u64(j, "rng_seed", ctx);
  const auto& nodes = detail::json_require(j, "nodes", ctx);
  if (!nodes.is_array())
    throw ConfigError("federation config: 'nodes' must be an array");
  for (const auto& nj : nodes) {
    NodeSpec n;
    n.node_id = detail::json_string(nj, "node_id", ctx);
    n.capacity_bytes = detail::json_u64(nj, "capacity_bytes", ctx);
    if (nj.contains("high_watermark"))
      n.high_watermark = detail::json_double(nj, "high_watermark", ctx);
    if (nj.contains("low_watermark"))
      n.low_watermark = detail::json_double(nj, "low_watermark", ctx);
    spec.nodes.push_back(std::move(n));
  }
  const auto& pol = detail::json_require(j, "policy", ctx);
  auto mode = policy_mode_from_name(detail::json_string(pol, "mode", ctx));
  if (!mode)
    throw ConfigError("federation config: unknown policy mode");
  spec.policy.mode = *mode;
  if (pol.contains("partition_map")) {
    const auto& pm = pol["partition_map"];
    if (!pm.is_object())
      throw ConfigError("federation config: partition_map must be an object");
    for (const auto& [cls, members] : pm.items()) {
      if (!members.is_array())
        throw ConfigError("federation config: partition for '" + cls +
                          "' must be an array");
      for (const auto& m : members) {
        if (!m.is_string())
          throw ConfigError("federation config: partition members are strings");
        spec.policy.partition_map[cls].insert(m.get<std::string>());
      }
    }
  }
  if (pol.contains("allow_overlap")) {
    if (!pol["allow_overlap"].is_boolean())
      throw ConfigError("federation config: allow_overlap must be a boolean");
    spec.policy.allow_overlap = pol["allow_overlap"].get<bool>();
  }
  if (pol.contains("bypass_threshold_bytes"))
    spec.policy.bypass_threshold_bytes =
        detail::json_u64(pol, "bypass_threshold_bytes", ctx);
  if (j.contains("throughput_model")) {
    const auto& tm = j["throughput_model"];
    spec.throughput_model.wan_max_bps = detail::json_double(tm, "wan_max_bps", ctx);
    spec.throughput_model.lan_max_bps = detail::json_double(tm, "lan_max_bps", ctx);
    spec.throughput_model.ramp_bytes = detail::json_double(tm, "ramp_bytes", ctx);
    spec.throughput_model.jitter_lognorm_sigma =
        detail::json_double(tm, "jitter_lognorm_sigma", ctx);
  }
  validate_federation(spec);
  return spec;
}

}  // namespace cachecast
