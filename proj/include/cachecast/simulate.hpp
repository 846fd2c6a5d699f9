#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cachecast/aggregate.hpp"
#include "cachecast/cache_node.hpp"
#include "cachecast/federation.hpp"
#include "cachecast/rng.hpp"
#include "cachecast/routing.hpp"
#include "cachecast/trace.hpp"

namespace cachecast {

struct SimulateError : std::runtime_error {
  enum class Kind { NonUnknownOutcome, NotTimeOrdered, UnmappedClass };

  SimulateError(Kind k, const std::string& message)
      : std::runtime_error(message), kind(k) {}

  Kind kind;
};

struct SimulationReport {
  Trace resolved;
  SummaryStats summary;
  std::uint64_t wan_bytes = 0;
  std::uint64_t evictions_total = 0;
  std::uint64_t pollution_evictions = 0;
  std::map<std::string, SummaryStats> per_class_summary;
};

inline double model_transfer_seconds(std::uint64_t size_bytes, Outcome outcome,
                                     const ThroughputModelSpec& model,
                                     Rng& rng) {
  const double r_max =
      outcome == Outcome::Hit ? model.lan_max_bps : model.wan_max_bps;
  const double size = static_cast<double>(size_bytes);
  const double r_eff = r_max * size / (size + model.ramp_bytes);
  // The jitter draw happens unconditionally so RNG streams stay aligned
  // across policy variants of the same run.
  const double jitter = rng.lognormal(0.0, model.jitter_lognorm_sigma);
  return size / (r_eff * jitter);
}

// Replays a request stream (records with Unknown outcomes) against the
// federation, filling in outcome, node_id and transfer_seconds. Bypassed
// requests carry node_id "wan"; unadmissible oversized misses are served
// through their routed node without being cached.
inline SimulationReport simulate(const Trace& requests,
                                 const FederationSpec& federation) {
  validate_federation(federation);

  std::vector<CacheNode> nodes;
  nodes.reserve(federation.nodes.size());
  std::unordered_map<std::string, std::size_t> node_index;
  std::vector<rendezvous::Candidate> all_candidates;
  for (const auto& ns : federation.nodes) {
    node_index.emplace(ns.node_id, nodes.size());
    nodes.emplace_back(ns);
    all_candidates.push_back(
        {ns.node_id, static_cast<double>(ns.capacity_bytes)});
  }

  const bool partitioned = federation.policy.mode == PolicyMode::Partitioned;
  std::map<std::string, std::vector<rendezvous::Candidate>> class_candidates;
  if (partitioned) {
    for (const auto& [cls, members] : federation.policy.partition_map) {
      auto& cands = class_candidates[cls];
      for (const auto& id : members) {
        const auto& ns = federation.nodes[node_index.at(id)];
        cands.push_back({ns.node_id, static_cast<double>(ns.capacity_bytes)});
      }
    }
  }
  const bool bypass = federation.policy.mode == PolicyMode::Bypass;
  const std::uint64_t bypass_threshold = federation.policy.bypass_threshold_bytes;

  SimulationReport report;
  report.resolved.meta = requests.meta;
  report.resolved.records.reserve(requests.records.size());

  Rng rng(federation.rng_seed);
  std::unordered_map<std::string, std::string> admitted_class;
  TimeMs prev_ts = std::numeric_limits<TimeMs>::min();

  for (std::size_t i = 0; i < requests.records.size(); ++i) {
    const auto& req = requests.records[i];
    if (req.outcome != Outcome::Unknown)
      throw SimulateError(SimulateError::Kind::NonUnknownOutcome,
                          "record " + std::to_string(i) +
                              " already has a resolved outcome");
    if (req.ts < prev_ts)
      throw SimulateError(SimulateError::Kind::NotTimeOrdered,
                          "record " + std::to_string(i) +
                              " is out of time order");
    prev_ts = req.ts;

    AccessRecord out = req;
    if (bypass && req.size_bytes >= bypass_threshold) {
      out.outcome = Outcome::Miss;
      out.node_id = "wan";
      report.wan_bytes += req.size_bytes;
    } else {
      std::span<const rendezvous::Candidate> cands = all_candidates;
      if (partitioned) {
        auto it = class_candidates.find(req.file_class);
        if (it == class_candidates.end())
          throw SimulateError(SimulateError::Kind::UnmappedClass,
                              "no partition maps file class '" +
                                  req.file_class + "'");
        cands = it->second;
      }
      auto& node = nodes[node_index.at(
          cands[rendezvous::select(req.file_id, cands)].node_id)];
      out.node_id = node.spec().node_id;

      if (node.lookup_and_touch(req.file_id) == Outcome::Hit) {
        out.outcome = Outcome::Hit;
      } else {
        out.outcome = Outcome::Miss;
        report.wan_bytes += req.size_bytes;
        if (node.admissible(req.size_bytes)) {
          auto evicted = node.evict_and_admit(req.file_id, req.size_bytes);
          report.evictions_total += evicted.size();
          for (const auto& id : evicted) {
            auto it = admitted_class.find(id);
            if (req.file_class == "L" && it != admitted_class.end() &&
                it->second == "S")
              report.pollution_evictions += 1;
            if (it != admitted_class.end()) admitted_class.erase(it);
          }
          admitted_class[req.file_id] = req.file_class;
        }
      }
    }
    out.transfer_seconds = model_transfer_seconds(
        req.size_bytes, out.outcome, federation.throughput_model, rng);

    auto& total = report.summary;
    auto& cls = report.per_class_summary[req.file_class];
    total.total_accesses += 1;
    cls.total_accesses += 1;
    if (out.outcome == Outcome::Hit) {
      total.total_hits += 1;
      total.hit_bytes += req.size_bytes;
      cls.total_hits += 1;
      cls.hit_bytes += req.size_bytes;
    } else {
      total.total_misses += 1;
      total.miss_bytes += req.size_bytes;
      cls.total_misses += 1;
      cls.miss_bytes += req.size_bytes;
    }
    report.resolved.records.push_back(std::move(out));
  }

  auto fill_rates = [](SummaryStats& s) {
    if (s.total_accesses)
      s.file_hit_rate = static_cast<double>(s.total_hits) /
                        static_cast<double>(s.total_accesses);
    const std::uint64_t bytes = s.hit_bytes + s.miss_bytes;
    if (bytes)
      s.byte_hit_rate =
          static_cast<double>(s.hit_bytes) / static_cast<double>(bytes);
  };
  fill_rates(report.summary);
  for (auto& [_, s] : report.per_class_summary) fill_rates(s);
  return report;
}

inline nlohmann::json report_to_json(const SimulationReport& report) {
  auto summary_json = [](const SummaryStats& s) {
    return nlohmann::json{{"total_accesses", s.total_accesses},
                          {"total_hits", s.total_hits},
                          {"total_misses", s.total_misses},
                          {"hit_bytes", s.hit_bytes},
                          {"miss_bytes", s.miss_bytes},
                          {"file_hit_rate", s.file_hit_rate},
                          {"byte_hit_rate", s.byte_hit_rate}};
  };
  nlohmann::json j;
  j["summary"] = summary_json(report.summary);
  j["wan_bytes"] = report.wan_bytes;
  j["evictions_total"] = report.evictions_total;
  j["pollution_evictions"] = report.pollution_evictions;
  j["per_class_summary"] = nlohmann::json::object();
  for (const auto& [cls, s] : report.per_class_summary)
    j["per_class_summary"][cls] = summary_json(s);
  return j;
}

}  // namespace cachecast
