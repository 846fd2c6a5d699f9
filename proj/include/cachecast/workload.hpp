#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cachecast/config.hpp"
#include "cachecast/federation.hpp"
#include "cachecast/rng.hpp"
#include "cachecast/simulate.hpp"
#include "cachecast/time.hpp"
#include "cachecast/trace.hpp"

namespace cachecast {

struct InvalidSpec : ConfigError {
  using ConfigError::ConfigError;
};

struct FileClassSpec {
  std::string class_label;
  std::uint64_t population = 1;
  double size_lognorm_mu = 0.0;
  double size_lognorm_sigma = 0.0;
  double zipf_exponent = 0.0;
  double request_rate_per_hour = 0.0;

  bool operator==(const FileClassSpec&) const = default;
};

struct CampaignSpec {
  TimeMs start = 0;
  TimeMs end = 0;
  std::string class_label;
  double rate_multiplier = 1.0;
  // Fraction of campaign requests that target never-before-seen files.
  double fresh_fraction = 0.0;

  bool operator==(const CampaignSpec&) const = default;
};

struct WorkloadSpec {
  std::vector<FileClassSpec> classes;
  std::vector<CampaignSpec> campaigns;
  TimeMs horizon_start = 0;
  TimeMs horizon_end = 0;
  std::uint64_t rng_seed = 0;

  bool operator==(const WorkloadSpec&) const = default;
};

inline void validate_workload(const WorkloadSpec& spec) {
  if (spec.horizon_start >= spec.horizon_end)
    throw InvalidSpec("workload: horizon must be a non-empty interval");
  std::set<std::string> labels;
  for (const auto& c : spec.classes) {
    if (c.class_label.empty())
      throw InvalidSpec("workload: class_label must be non-empty");
    if (!labels.insert(c.class_label).second)
      throw InvalidSpec("workload: duplicate class_label " + c.class_label);
    if (c.population == 0)
      throw InvalidSpec("workload: population must be positive for class " +
                        c.class_label);
    if (c.size_lognorm_sigma < 0.0)
      throw InvalidSpec("workload: size_lognorm_sigma must be >= 0 for class " +
                        c.class_label);
    if (c.zipf_exponent < 0.0)
      throw InvalidSpec("workload: zipf_exponent must be >= 0 for class " +
                        c.class_label);
    if (c.request_rate_per_hour < 0.0)
      throw InvalidSpec("workload: request_rate_per_hour must be >= 0 for class " +
                        c.class_label);
  }
  for (const auto& cp : spec.campaigns) {
    if (!labels.count(cp.class_label))
      throw InvalidSpec("workload: campaign references unknown class " +
                        cp.class_label);
    if (cp.start >= cp.end)
      throw InvalidSpec("workload: campaign interval must be non-empty");
    if (cp.rate_multiplier < 1.0)
      throw InvalidSpec("workload: rate_multiplier must be >= 1");
    if (cp.fresh_fraction < 0.0 || cp.fresh_fraction > 1.0)
      throw InvalidSpec("workload: fresh_fraction must be in [0,1]");
  }
}

namespace detail {

// Cumulative Zipf distribution over ranks 1..population; exponent 0 is
// uniform. Sampling is a binary search over the cdf with one uniform draw.
class ZipfSampler {
 public:
  ZipfSampler(std::uint64_t population, double exponent) {
    cdf_.reserve(population);
    double sum = 0.0;
    for (std::uint64_t r = 1; r <= population; ++r) {
      sum += std::pow(static_cast<double>(r), -exponent);
      cdf_.push_back(sum);
    }
    for (auto& v : cdf_) v /= sum;
    cdf_.back() = 1.0;
  }

  // Returns a 1-based rank.
  std::uint64_t sample(double u) const {
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<std::uint64_t>(it - cdf_.begin()) + 1;
  }

  double pmf(std::uint64_t rank) const {
    return cdf_[rank - 1] - (rank >= 2 ? cdf_[rank - 2] : 0.0);
  }

 private:
  std::vector<double> cdf_;
};

inline std::uint64_t file_size_for(const std::string& file_id,
                                   const FileClassSpec& cls,
                                   std::uint64_t size_seed) {
  Rng rng(murmur64a(file_id, size_seed));
  const double raw = rng.lognormal(cls.size_lognorm_mu, cls.size_lognorm_sigma);
  if (!(raw >= 1.0)) return 1;
  if (raw >= 9.0e18) return 9'000'000'000'000'000'000ull;
  return static_cast<std::uint64_t>(std::llround(raw));
}

inline double overlap_fraction(TimeMs w0, TimeMs w1, TimeMs a, TimeMs b) {
  const TimeMs lo = std::max(w0, a);
  const TimeMs hi = std::min(w1, b);
  if (hi <= lo) return 0.0;
  return static_cast<double>(hi - lo) / static_cast<double>(w1 - w0);
}

}  // namespace detail

// Expected number of requests under the spec (the integral of the
// campaign-modulated rate over the horizon), useful for sizing checks.
inline double expected_request_count(const WorkloadSpec& spec) {
  validate_workload(spec);
  double total = 0.0;
  for (const auto& cls : spec.classes) {
    for (TimeMs w0 = floor_to_hour(spec.horizon_start); w0 < spec.horizon_end;
         w0 += kMsPerHour) {
      const TimeMs lo = std::max(w0, spec.horizon_start);
      const TimeMs hi = std::min(w0 + kMsPerHour, spec.horizon_end);
      if (hi <= lo) continue;
      double factor = 1.0;
      for (const auto& cp : spec.campaigns)
        if (cp.class_label == cls.class_label)
          factor += (cp.rate_multiplier - 1.0) *
                    detail::overlap_fraction(lo, hi, cp.start, cp.end);
      total += cls.request_rate_per_hour * factor *
               (static_cast<double>(hi - lo) / static_cast<double>(kMsPerHour));
    }
  }
  return total;
}

// Generates the synthetic request stream: per-class Poisson arrivals hour by
// hour, Zipf-rank file popularity, campaign episodes that raise the rate and
// mix in never-before-seen files, and sizes that are a pure function of
// file_id (so a file's size never changes and is independent of the draw
// order).
inline Trace generate(const WorkloadSpec& spec) {
  validate_workload(spec);

  std::vector<detail::ZipfSampler> samplers;
  samplers.reserve(spec.classes.size());
  for (const auto& cls : spec.classes)
    samplers.emplace_back(cls.population, cls.zipf_exponent);

  const std::uint64_t size_seed = derive_seed(spec.rng_seed, 0x5a1f);
  std::vector<std::uint64_t> fresh_counter(spec.classes.size(), 0);

  Trace trace;
  trace.meta.source = "synthetic";

  std::vector<AccessRecord> hour_batch;
  const TimeMs first_hour = floor_to_hour(spec.horizon_start);
  std::uint64_t hour_index = 0;
  for (TimeMs w0 = first_hour; w0 < spec.horizon_end;
       w0 += kMsPerHour, ++hour_index) {
    const TimeMs lo = std::max(w0, spec.horizon_start);
    const TimeMs hi = std::min(w0 + kMsPerHour, spec.horizon_end);
    if (hi <= lo) continue;
    hour_batch.clear();

    for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
      const auto& cls = spec.classes[ci];
      double factor = 1.0;
      for (const auto& cp : spec.campaigns)
        if (cp.class_label == cls.class_label)
          factor += (cp.rate_multiplier - 1.0) *
                    detail::overlap_fraction(lo, hi, cp.start, cp.end);
      const double lambda =
          cls.request_rate_per_hour * factor *
          (static_cast<double>(hi - lo) / static_cast<double>(kMsPerHour));
      if (lambda <= 0.0) continue;

      Rng rng(derive_seed(spec.rng_seed, hour_index, ci));
      const std::uint64_t n = rng.poisson(lambda);
      for (std::uint64_t k = 0; k < n; ++k) {
        // Fixed ordering of draws per arrival keeps traces aligned when only
        // fresh_fraction changes between runs.
        const double u_time = rng.uniform01();
        const double u_fresh = rng.uniform01();
        const double u_rank = rng.uniform01();

        AccessRecord rec;
        rec.ts = lo + static_cast<TimeMs>(
                          u_time * static_cast<double>(hi - lo));
        if (rec.ts >= hi) rec.ts = hi - 1;
        rec.file_class = cls.class_label;

        const CampaignSpec* campaign = nullptr;
        for (const auto& cp : spec.campaigns)
          if (cp.class_label == cls.class_label && rec.ts >= cp.start &&
              rec.ts < cp.end) {
            campaign = &cp;
            break;
          }
        if (campaign && u_fresh < campaign->fresh_fraction) {
          rec.file_id = cls.class_label + "-fresh-" +
                        std::to_string(++fresh_counter[ci]);
        } else {
          rec.file_id =
              cls.class_label + "-" + std::to_string(samplers[ci].sample(u_rank));
        }
        rec.size_bytes = detail::file_size_for(rec.file_id, cls, size_seed);
        hour_batch.push_back(std::move(rec));
      }
    }

    std::stable_sort(hour_batch.begin(), hour_batch.end(),
                     [](const AccessRecord& a, const AccessRecord& b) {
                       return a.ts < b.ts;
                     });
    for (auto& rec : hour_batch) trace.records.push_back(std::move(rec));
  }
  return trace;
}

// Two-class reference workload: hot small files ("S") carrying 90% of
// baseline requests, cold large files ("L"), and one five-month large-file
// campaign. Rates and populations scale linearly; sizes stay at their real
// magnitudes (pair with desk_scale for shrunken runs). The reuse knobs
// (populations, zipf exponents, fresh_fraction) are the frozen output of the
// calibration harness at scale 1e-3 against the default federation.
inline WorkloadSpec default_socal_workload(double scale) {
  if (!(scale > 0.0 && scale <= 1.0))
    throw InvalidSpec("default_socal_workload: scale must be in (0,1]");

  WorkloadSpec spec;
  spec.rng_seed = 20210701;
  spec.horizon_start = make_utc(2021, 7, 1);
  spec.horizon_end = make_utc(2022, 7, 1);

  FileClassSpec small;
  small.class_label = "S";
  small.population = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(1.6e6 * scale)));
  small.size_lognorm_mu = std::log(30.0e6) - 0.5 * 0.8 * 0.8;
  small.size_lognorm_sigma = 0.8;
  small.zipf_exponent = 0.85;
  small.request_rate_per_hour = 750.0 * scale;

  FileClassSpec large;
  large.class_label = "L";
  large.population = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(std::llround(3.75e5 * scale)));
  large.size_lognorm_mu = std::log(4.0e9) - 0.5;
  large.size_lognorm_sigma = 1.0;
  large.zipf_exponent = 0.95;
  large.request_rate_per_hour = 83.3333333333333 * scale;

  CampaignSpec campaign;
  campaign.start = make_utc(2021, 10, 1);
  campaign.end = make_utc(2022, 3, 1);
  campaign.class_label = "L";
  campaign.rate_multiplier = 5.6;
  campaign.fresh_fraction = 0.53;

  spec.classes = {small, large};
  spec.campaigns = {campaign};
  return spec;
}

// Shrinks file sizes by a common factor (shifting the lognormal location) so
// desk-scale runs pair with a default_federation(divisor) topology while
// preserving every size ratio.
inline WorkloadSpec desk_scale(WorkloadSpec spec, double size_divisor) {
  if (!(size_divisor >= 1.0))
    throw InvalidSpec("desk_scale: size_divisor must be >= 1");
  for (auto& cls : spec.classes) cls.size_lognorm_mu -= std::log(size_divisor);
  return spec;
}

inline nlohmann::json workload_to_json(const WorkloadSpec& spec) {
  nlohmann::json j;
  j["rng_seed"] = spec.rng_seed;
  j["horizon"] = {{"start", format_rfc3339(spec.horizon_start)},
                  {"end", format_rfc3339(spec.horizon_end)}};
  j["classes"] = nlohmann::json::array();
  for (const auto& c : spec.classes)
    j["classes"].push_back({{"class_label", c.class_label},
                            {"population", c.population},
                            {"size_lognorm_mu", c.size_lognorm_mu},
                            {"size_lognorm_sigma", c.size_lognorm_sigma},
                            {"zipf_exponent", c.zipf_exponent},
                            {"request_rate_per_hour", c.request_rate_per_hour}});
  j["campaigns"] = nlohmann::json::array();
  for (const auto& cp : spec.campaigns)
    j["campaigns"].push_back({{"start", format_rfc3339(cp.start)},
                              {"end", format_rfc3339(cp.end)},
                              {"class_label", cp.class_label},
                              {"rate_multiplier", cp.rate_multiplier},
                              {"fresh_fraction", cp.fresh_fraction}});
  return j;
}

inline WorkloadSpec workload_from_json(const nlohmann::json& j) {
  constexpr const char* ctx = "workload config";
  WorkloadSpec spec;
  spec.rng_seed = detail::json_u64(j, "rng_seed", ctx);
  const auto& hz = detail::json_require(j, "horizon", ctx);
  auto parse_instant = [&](const nlohmann::json& obj, const char* key) {
    auto t = parse_rfc3339(detail::json_string(obj, key, ctx));
    if (!t)
      throw InvalidSpec(std::string(ctx) + ": bad timestamp in '" + key + "'");
    return *t;
  };
  spec.horizon_start = parse_instant(hz, "start");
  spec.horizon_end = parse_instant(hz, "end");
  const auto& classes = detail::json_require(j, "classes", ctx);
  if (!classes.is_array())
    throw InvalidSpec("workload config: 'classes' must be an array");
  for (const auto& cj : classes) {
    FileClassSpec c;
    c.class_label = detail::json_string(cj, "class_label", ctx);
    c.population = detail::json_u64(cj, "population", ctx);
    c.size_lognorm_mu = detail::json_double(cj, "size_lognorm_mu", ctx);
    c.size_lognorm_sigma = detail::json_double(cj, "size_lognorm_sigma", ctx);
    c.zipf_exponent = detail::json_double(cj, "zipf_exponent", ctx);
    c.request_rate_per_hour = detail::json_double(cj, "request_rate_per_hour", ctx);
    spec.classes.push_back(std::move(c));
  }
  if (j.contains("campaigns")) {
    const auto& campaigns = j["campaigns"];
    if (!campaigns.is_array())
      throw InvalidSpec("workload config: 'campaigns' must be an array");
    for (const auto& cj : campaigns) {
      CampaignSpec cp;
      cp.start = parse_instant(cj, "start");
      cp.end = parse_instant(cj, "end");
      cp.class_label = detail::json_string(cj, "class_label", ctx);
      cp.rate_multiplier = detail::json_double(cj, "rate_multiplier", ctx);
      cp.fresh_fraction = detail::json_double(cj, "fresh_fraction", ctx);
      spec.campaigns.push_back(std::move(cp));
    }
  }
  validate_workload(spec);
  return spec;
}

struct CalibrationResult {
  WorkloadSpec spec;
  double achieved_file_hit_rate = 0.0;
  double achieved_byte_hit_rate = 0.0;
  double objective = 0.0;
  std::uint64_t evaluations = 0;
  bool budget_exhausted = false;
};

// Coordinate descent over the reuse knobs (per-class zipf exponent and
// population, plus the first campaign's fresh_fraction) minimizing squared
// error against target (file_hit_rate, byte_hit_rate). Budget counts simulate
// evaluations; exhausting it returns the best spec found rather than failing.
inline CalibrationResult calibrate(const SummaryStats& targets,
                                   const WorkloadSpec& base,
                                   const FederationSpec& federation,
                                   std::uint64_t budget) {
  if (budget < 1) throw InvalidSpec("calibrate: budget must be >= 1");
  validate_workload(base);

  CalibrationResult result;
  result.spec = base;

  auto evaluate = [&](const WorkloadSpec& spec, double& file_rate,
                      double& byte_rate) {
    const auto report = simulate(generate(spec), federation);
    file_rate = report.summary.file_hit_rate;
    byte_rate = report.summary.byte_hit_rate;
    const double df = file_rate - targets.file_hit_rate;
    const double db = byte_rate - targets.byte_hit_rate;
    result.evaluations += 1;
    return df * df + db * db;
  };

  double best_file = 0.0, best_byte = 0.0;
  double best = evaluate(result.spec, best_file, best_byte);

  struct Knob {
    enum class Kind { Zipf, Population, Fresh } kind;
    std::size_t index;
  };
  std::vector<Knob> knobs;
  for (std::size_t i = 0; i < base.classes.size(); ++i) {
    knobs.push_back({Knob::Kind::Zipf, i});
    knobs.push_back({Knob::Kind::Population, i});
  }
  if (!base.campaigns.empty()) knobs.push_back({Knob::Kind::Fresh, 0});

  double zipf_step = 0.1;
  double pop_step = 1.25;
  double fresh_step = 0.08;
  const double target_tol = 0.01;

  auto close_enough = [&] {
    return std::abs(best_file - targets.file_hit_rate) <= target_tol &&
           std::abs(best_byte - targets.byte_hit_rate) <= target_tol;
  };

  while (result.evaluations < budget && !close_enough()) {
    bool improved = false;
    for (const auto& knob : knobs) {
      for (int direction : {+1, -1}) {
        if (result.evaluations >= budget) break;
        WorkloadSpec candidate = result.spec;
        switch (knob.kind) {
          case Knob::Kind::Zipf: {
            auto& v = candidate.classes[knob.index].zipf_exponent;
            v = std::clamp(v + direction * zipf_step, 0.0, 3.0);
            break;
          }
          case Knob::Kind::Population: {
            auto& v = candidate.classes[knob.index].population;
            const double scaled = direction > 0
                                      ? static_cast<double>(v) * pop_step
                                      : static_cast<double>(v) / pop_step;
            v = std::max<std::uint64_t>(
                1, static_cast<std::uint64_t>(std::llround(scaled)));
            break;
          }
          case Knob::Kind::Fresh: {
            auto& v = candidate.campaigns[knob.index].fresh_fraction;
            v = std::clamp(v + direction * fresh_step, 0.0, 1.0);
            break;
          }
        }
        if (candidate == result.spec) continue;
        double file_rate = 0.0, byte_rate = 0.0;
        const double objective = evaluate(candidate, file_rate, byte_rate);
        if (objective < best) {
          best = objective;
          best_file = file_rate;
          best_byte = byte_rate;
          result.spec = std::move(candidate);
          improved = true;
          break;
        }
      }
      if (result.evaluations >= budget || close_enough()) break;
    }
    if (!improved) {
      zipf_step *= 0.5;
      pop_step = 1.0 + (pop_step - 1.0) * 0.5;
      fresh_step *= 0.5;
      if (zipf_step < 0.01 && pop_step < 1.02 && fresh_step < 0.01) break;
    }
  }

  result.achieved_file_hit_rate = best_file;
  result.achieved_byte_hit_rate = best_byte;
  result.objective = best;
  result.budget_exhausted = result.evaluations >= budget && !close_enough();
  return result;
}

}  // namespace cachecast
