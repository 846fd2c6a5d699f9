// Acceptance gate. Runs the nine headline checks end to end, prints one
// PASS/FAIL line per criterion with the measured numbers, and exits nonzero
// if any criterion fails. Tolerances are pinned here, not configurable.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cachecast/cachecast.hpp"
#include "testutil.hpp"

using namespace cachecast;

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct CritResult {
  bool ok = false;
  std::string detail;
};

WorkloadSpec desk_workload(std::uint64_t seed) {
  WorkloadSpec spec = desk_scale(default_socal_workload(1e-3), 1000.0);
  spec.rng_seed = seed;
  return spec;
}

// 1. Calibrated hit-rate divergence on the default federation.
CritResult crit_hit_rate_divergence() {
  const auto t0 = Clock::now();
  const Trace trace = generate(desk_workload(20210701));
  const SimulationReport rep = simulate(trace, default_federation(1'000'000));
  const double fh = rep.summary.file_hit_rate;
  const double bh = rep.summary.byte_hit_rate;
  const double secs = seconds_since(t0);
  CritResult r;
  r.ok = fh >= 0.626 && fh <= 0.726 && bh >= 0.304 && bh <= 0.404 &&
         fh - bh >= 0.20 && secs < 120.0;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "file_hit=%.4f byte_hit=%.4f gap=%.4f n=%llu %.1fs", fh, bh,
                fh - bh,
                static_cast<unsigned long long>(rep.summary.total_accesses),
                secs);
  r.detail = buf;
  return r;
}

// 2. Partitioned and Bypass both beat Unified on class-S misses at ten
// paired seeds; Partitioned admits no cross-class pollution at all.
CritResult crit_pollution_mitigation() {
  const FederationSpec uni = default_federation(1'000'000);

  FederationSpec part = uni;
  part.policy.mode = PolicyMode::Partitioned;
  for (const auto& n : uni.nodes) {
    const bool small_tier = n.node_id.starts_with("site-b");
    part.policy.partition_map[small_tier ? "S" : "L"].insert(n.node_id);
  }

  FederationSpec byp = uni;
  byp.policy.mode = PolicyMode::Bypass;
  // 1 GB at the desk size scale of 10^-3.
  byp.policy.bypass_threshold_bytes = 1'000'000;

  int part_wins = 0;
  int byp_wins = 0;
  bool pollution_zero = true;
  for (int k = 0; k < 10; ++k) {
    const Trace trace = generate(desk_workload(20210701 + k));
    const auto ru = simulate(trace, uni);
    const auto rp = simulate(trace, part);
    const auto rb = simulate(trace, byp);
    pollution_zero = pollution_zero && rp.pollution_evictions == 0;
    const auto u_miss = ru.per_class_summary.at("S").total_misses;
    if (rp.per_class_summary.at("S").total_misses < u_miss) ++part_wins;
    if (rb.per_class_summary.at("S").total_misses < u_miss) ++byp_wins;
  }

  CritResult r;
  r.ok = pollution_zero && part_wins == 10 && byp_wins == 10;
  char buf[120];
  std::snprintf(buf, sizeof buf,
                "partitioned wins %d/10, bypass wins %d/10, pollution %s",
                part_wins, byp_wins, pollution_zero ? "0" : "nonzero");
  r.detail = buf;
  return r;
}

// 3. The simulator's per-node behavior equals a brute-force reference LRU
// request by request.
CritResult crit_lru_oracle() {
  std::uint64_t checked = 0;
  std::uint64_t mismatches = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 1000 + 7);
    Trace trace;
    trace.records.reserve(100'000);
    TimeMs ts = make_utc(2021, 7, 1);
    for (int i = 0; i < 100'000; ++i) {
      ts += 1 + static_cast<TimeMs>(rng.below(5000));
      const std::string file =
          rng.below(10) < 5 ? "hot-" + std::to_string(rng.below(50))
                            : "file-" + std::to_string(rng.below(4000));
      trace.records.push_back(
          testutil::make_request(ts, file, "S", 1 + rng.below(20'000)));
    }

    FederationSpec fed;
    fed.nodes = {{"lru-1", 1'000'000}};
    fed.rng_seed = seed;
    const auto rep = simulate(trace, fed);

    testutil::ReferenceLru ref(1'000'000, 0.95, 0.90);
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
      const bool hit = ref.access(trace.records[i].file_id,
                                  trace.records[i].size_bytes);
      const Outcome want = hit ? Outcome::Hit : Outcome::Miss;
      if (rep.resolved.records[i].outcome != want) ++mismatches;
      ++checked;
    }
  }
  CritResult r;
  r.ok = mismatches == 0;
  r.detail = std::to_string(mismatches) + " mismatches in " +
             std::to_string(checked) + " requests";
  return r;
}

// 4. BPTT gradients against central finite differences on small random
// configurations; the loss is sum(c_i * pred_i) so dL/dpred is exact.
CritResult crit_gradients() {
  const std::size_t B = 3, W = 5, H = 4;
  const double eps = 1e-5;
  double worst = 0.0;

  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng prng(seed);
    auto params = init_lstm_params<double>(H, prng);
    params.b_head = prng.uniform(-0.5, 0.5);
    Rng xrng(seed + 1000);
    std::vector<double> x(W * B * kNumFeatures);
    for (auto& v : x) v = xrng.uniform(-1.0, 1.0);
    Rng crng(seed + 2000);
    std::vector<double> cvec(B);
    for (auto& c : cvec) c = crng.uniform(-1.0, 1.0);

    auto loss_of = [&](const LstmParams<double>& p) {
      LstmCache<double> cache;
      cache.resize(B, W, H);
      cache.x = x;
      lstm_forward(p, cache);
      double loss = 0.0;
      for (std::size_t i = 0; i < B; ++i) loss += cvec[i] * cache.pred[i];
      return loss;
    };

    LstmCache<double> cache;
    cache.resize(B, W, H);
    cache.x = x;
    lstm_forward(params, cache);
    LstmGrads<double> grads;
    lstm_backward(params, cache, std::span<const double>(cvec), grads);

    auto check_block = [&](std::vector<double>& block,
                           const std::vector<double>& analytic) {
      for (std::size_t i = 0; i < block.size(); ++i) {
        const double save = block[i];
        block[i] = save + eps;
        const double up = loss_of(params);
        block[i] = save - eps;
        const double down = loss_of(params);
        block[i] = save;
        const double numeric = (up - down) / (2.0 * eps);
        const double denom =
            std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
        worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
      }
    };
    check_block(params.w_x, grads.w_x);
    check_block(params.w_h, grads.w_h);
    check_block(params.b, grads.b);
    check_block(params.w_head, grads.w_head);
    {
      const double save = params.b_head;
      params.b_head = save + eps;
      const double up = loss_of(params);
      params.b_head = save - eps;
      const double down = loss_of(params);
      params.b_head = save;
      const double numeric = (up - down) / (2.0 * eps);
      const double denom =
          std::max({std::abs(numeric), std::abs(grads.b_head), 1e-8});
      worst = std::max(worst, std::abs(numeric - grads.b_head) / denom);
    }
  }

  CritResult r;
  r.ok = worst < 1e-4;
  char buf[64];
  std::snprintf(buf, sizeof buf, "max rel err %.3e over 100 configs", worst);
  r.detail = buf;
  return r;
}

// 5. Every forecast target reaches relative test RMSE below 0.5 on the
// campaign-shaped hourly benchmark with default hyperparameters.
CritResult crit_forecast_skill() {
  const auto t0 = Clock::now();
  const auto bins = synthetic_telemetry_hourly(8712, 1337);

  std::vector<std::future<double>> futs;
  for (const TargetFeature t : kAllTargets) {
    futs.push_back(std::async(std::launch::async, [&bins, t] {
      ForecastConfig cfg;
      cfg.target = t;
      return run_forecast(bins, cfg).eval.relative_rmse;
    }));
  }

  CritResult r;
  r.ok = true;
  std::string detail;
  for (std::size_t i = 0; i < kAllTargets.size(); ++i) {
    const double rel = futs[i].get();
    r.ok = r.ok && rel < 0.5;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s=%.3f ", target_name(kAllTargets[i]),
                  rel);
    detail += buf;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "(%.0fs)", seconds_since(t0));
  r.detail = detail + buf;
  return r;
}

// 6. Target smoothing pays off on the spiky benchmark: both moving-average
// windows beat the raw target and the weekly window is no worse than the
// daily one within 5%. The 168-bin input window makes the three runs an
// apples-to-apples comparison and keeps every target past the moving
// average warm-up.
CritResult crit_smoothing_gain() {
  const auto t0 = Clock::now();
  const auto bins = spiky_telemetry_hourly(2928, 9001);
  ForecastConfig cfg;
  cfg.target = TargetFeature::AvgMissThroughput;
  cfg.window_length = 168;
  cfg.hidden_units = 64;
  cfg.epochs = 30;

  auto run_one = [&bins, cfg](std::size_t w) {
    return forecast_smoothed(bins, cfg, w).eval.test_rmse;
  };
  auto f1 = std::async(std::launch::async, run_one, 1);
  auto f24 = std::async(std::launch::async, run_one, 24);
  auto f168 = std::async(std::launch::async, run_one, 168);
  const double r1 = f1.get(), r24 = f24.get(), r168 = f168.get();

  CritResult r;
  r.ok = r24 < r1 && r168 < r1 && r168 <= 1.05 * r24;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "raw=%.3e w24=%.3e w168=%.3e ratio=%.3f (%.0fs)", r1, r24,
                r168, r168 / r24, seconds_since(t0));
  r.detail = buf;
  return r;
}

// 7. Binning equals an independent brute-force group-by on a million random
// records, and daily bins conserve hourly totals.
CritResult crit_aggregation_oracle() {
  const Trace trace = testutil::random_trace(1'000'000, 424242, true);

  struct Acc {
    std::uint64_t mc = 0, mb = 0, hc = 0, hb = 0;
    double mt = 0.0, ht = 0.0;
  };
  auto group_by = [&trace](TimeMs dur) {
    std::map<TimeMs, Acc> acc;
    for (const auto& rec : trace.records) {
      Acc& a = acc[rec.ts - rec.ts % dur];
      const double tput =
          static_cast<double>(rec.size_bytes) / *rec.transfer_seconds;
      if (rec.outcome == Outcome::Miss) {
        a.mc += 1;
        a.mb += rec.size_bytes;
        a.mt += tput;
      } else {
        a.hc += 1;
        a.hb += rec.size_bytes;
        a.ht += tput;
      }
    }
    return acc;
  };

  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
  };

  std::string fail;
  auto check_granularity = [&](Granularity g, TimeMs dur) {
    const auto bins = bin_trace(trace, g);
    const auto oracle = group_by(dur);
    const TimeMs first = trace.records.front().ts - trace.records.front().ts % dur;
    const TimeMs last = trace.records.back().ts - trace.records.back().ts % dur;
    if (bins.size() != static_cast<std::size_t>((last - first) / dur) + 1) {
      fail = "bin count mismatch";
      return;
    }
    const double dur_s = static_cast<double>(dur) / 1000.0;
    for (const auto& b : bins) {
      Acc a;
      if (auto it = oracle.find(b.bin_start); it != oracle.end())
        a = it->second;
      const bool ints_ok = b.miss_count == a.mc && b.miss_bytes == a.mb &&
                           b.hit_count == a.hc && b.hit_bytes == a.hb;
      const double avg_m = a.mc ? a.mt / static_cast<double>(a.mc) : 0.0;
      const double avg_h = a.hc ? a.ht / static_cast<double>(a.hc) : 0.0;
      const bool floats_ok =
          close(b.agg_miss_throughput, static_cast<double>(a.mb) / dur_s) &&
          close(b.agg_hit_throughput, static_cast<double>(a.hb) / dur_s) &&
          close(b.avg_miss_throughput, avg_m) &&
          close(b.avg_hit_throughput, avg_h);
      if (!ints_ok || !floats_ok) {
        fail = "bin value mismatch at " + std::to_string(b.bin_start);
        return;
      }
    }
  };

  check_granularity(Granularity::Hourly, kMsPerHour);
  if (fail.empty()) check_granularity(Granularity::Daily, 24 * kMsPerHour);

  if (fail.empty()) {
    const auto hourly = bin_trace(trace, Granularity::Hourly);
    const auto daily = bin_trace(trace, Granularity::Daily);
    const TimeMs day = 24 * kMsPerHour;
    std::map<TimeMs, Acc> rollup;
    for (const auto& h : hourly) {
      Acc& a = rollup[h.bin_start - h.bin_start % day];
      a.mc += h.miss_count;
      a.mb += h.miss_bytes;
      a.hc += h.hit_count;
      a.hb += h.hit_bytes;
    }
    for (const auto& d : daily) {
      Acc a;
      if (auto it = rollup.find(d.bin_start); it != rollup.end())
        a = it->second;
      if (d.miss_count != a.mc || d.miss_bytes != a.mb ||
          d.hit_count != a.hc || d.hit_bytes != a.hb) {
        fail = "daily bin does not equal its hourly sum";
        break;
      }
    }
  }

  CritResult r;
  r.ok = fail.empty();
  r.detail = r.ok ? "hourly and daily bins match brute force on 1000000 records"
                  : fail;
  return r;
}

int run_cli(const std::string& bin, const std::string& args) {
  const std::string cmd =
      "env -u CACHECAST_SEED -u CACHECAST_CONFIG -u CACHECAST_OUT "
      "-u CACHECAST_JOBS '" + bin + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> manifest_output_hashes(const fs::path& p) {
  std::map<std::string, std::string> hashes;
  const auto m = manifest_from_json(nlohmann::json::parse(testutil::slurp(p)));
  for (const auto& f : m.outputs)
    hashes[fs::path(f.path).filename().string()] = f.sha256;
  return hashes;
}

// 8. The whole CLI pipeline is bitwise reproducible under a fixed seed.
CritResult crit_determinism() {
  const char* bin = std::getenv("CACHECAST_BIN");
  if (!bin) return {false, "CACHECAST_BIN is not set"};

  testutil::TempDir td;
  const fs::path root = td.path();
  testutil::spit(root / "workload.json", workload_to_json(desk_workload(404)).dump(2));
  testutil::spit(root / "federation.json",
                 federation_to_json(default_federation(1'000'000)).dump(2));
  ForecastConfig fcfg;
  fcfg.hidden_units = 8;
  fcfg.epochs = 2;
  fcfg.window_length = 12;
  testutil::spit(root / "forecast.json", forecast_config_to_json(fcfg).dump(2));

  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    const std::string d = dir.string();
    const std::string cfg = (root / "workload.json").string();
    if (run_cli(bin, "generate --config " + cfg + " --out " + d + "/trace.jsonl") != 0)
      return {false, "generate failed"};
    if (run_cli(bin, "simulate --trace " + d + "/trace.jsonl --config " +
                         (root / "federation.json").string() + " --out " + d +
                         "/resolved.jsonl") != 0)
      return {false, "simulate failed"};
    if (run_cli(bin, "aggregate --trace " + d +
                         "/resolved.jsonl --granularity hourly --out " + d +
                         "/bins.csv") != 0)
      return {false, "aggregate failed"};
    if (run_cli(bin, "forecast --bins " + d + "/bins.csv --config " +
                         (root / "forecast.json").string() +
                         " --target avg_miss_tput --out " + d + "/fc") != 0)
      return {false, "forecast failed"};
  }

  const std::array<const char*, 7> files = {
      "trace.jsonl",
      "resolved.jsonl",
      "resolved.jsonl.report.json",
      "bins.csv",
      "fc/eval.csv",
      "fc/model-avg_miss_tput-w1.txt",
      "fc/pred-avg_miss_tput-w1.csv",
  };
  for (const char* f : files) {
    if (testutil::slurp(root / "a" / f) != testutil::slurp(root / "b" / f))
      return {false, std::string(f) + " differs between identical runs"};
  }
  const std::array<const char*, 4> manifests = {
      "trace.jsonl.manifest.json", "resolved.jsonl.manifest.json",
      "bins.csv.manifest.json", "fc/manifest.json"};
  for (const char* m : manifests) {
    if (manifest_output_hashes(root / "a" / m) !=
        manifest_output_hashes(root / "b" / m))
      return {false, std::string(m) + " hashes differ between identical runs"};
  }
  return {true, "2 runs, 7 files byte-identical, 4 manifests hash-equal"};
}

// 9. Serialization round-trips ten thousand random records in both formats.
CritResult crit_round_trip() {
  const Trace trace = testutil::random_trace(10'000, 7777, true);
  for (const TraceFormat fmt : {TraceFormat::Csv, TraceFormat::JsonLines}) {
    const std::string text = write_trace_string(trace, fmt);
    const Trace back = parse_trace_string(text, fmt);
    if (!(back.records == trace.records))
      return {false, std::string("round trip changed records in ") +
                         (fmt == TraceFormat::Csv ? "csv" : "jsonl")};
  }
  return {true, "10000 records identical through csv and jsonl"};
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  struct Entry {
    const char* name;
    CritResult (*fn)();
  };
  const std::array<Entry, 9> entries = {{
      {"hit-rate divergence", crit_hit_rate_divergence},
      {"pollution mitigation", crit_pollution_mitigation},
      {"lru oracle equivalence", crit_lru_oracle},
      {"gradient correctness", crit_gradients},
      {"forecast skill", crit_forecast_skill},
      {"smoothing gain", crit_smoothing_gain},
      {"aggregation conservation", crit_aggregation_oracle},
      {"determinism", crit_determinism},
      {"round-trip", crit_round_trip},
  }};

  int failed = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CritResult r;
    try {
      r = entries[i].fn();
    } catch (const std::exception& e) {
      r.ok = false;
      r.detail = std::string("unexpected exception: ") + e.what();
    }
    if (!r.ok) ++failed;
    std::printf("criterion %zu %-26s %s  %s\n", i + 1, entries[i].name,
                r.ok ? "PASS" : "FAIL", r.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("acceptance: %zu/9 passed in %.0fs\n", entries.size() - failed,
              seconds_since(t0));
  return failed == 0 ? 0 : 1;
}
