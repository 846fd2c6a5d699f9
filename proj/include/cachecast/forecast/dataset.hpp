#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "cachecast/aggregate.hpp"
#include "cachecast/config.hpp"

namespace cachecast {

// The six forecastable series (the aggregate throughputs are inputs only:
// they are bin bytes divided by a constant).
enum class TargetFeature {
  MissCount,
  MissBytes,
  HitCount,
  HitBytes,
  AvgMissThroughput,
  AvgHitThroughput,
};

inline constexpr std::size_t kNumFeatures = 8;

inline constexpr std::array<TargetFeature, 6> kAllTargets = {
    TargetFeature::MissCount,          TargetFeature::MissBytes,
    TargetFeature::HitCount,           TargetFeature::HitBytes,
    TargetFeature::AvgMissThroughput,  TargetFeature::AvgHitThroughput,
};

inline const char* target_name(TargetFeature t) {
  switch (t) {
    case TargetFeature::MissCount: return "miss_count";
    case TargetFeature::MissBytes: return "miss_bytes";
    case TargetFeature::HitCount: return "hit_count";
    case TargetFeature::HitBytes: return "hit_bytes";
    case TargetFeature::AvgMissThroughput: return "avg_miss_tput";
    default: return "avg_hit_tput";
  }
}

inline std::optional<TargetFeature> target_from_name(std::string_view s) {
  if (s == "miss_count") return TargetFeature::MissCount;
  if (s == "miss_bytes") return TargetFeature::MissBytes;
  if (s == "hit_count") return TargetFeature::HitCount;
  if (s == "hit_bytes") return TargetFeature::HitBytes;
  if (s == "avg_miss_tput") return TargetFeature::AvgMissThroughput;
  if (s == "avg_hit_tput") return TargetFeature::AvgHitThroughput;
  return std::nullopt;
}

// Column index in the canonical 8-feature layout (bins CSV column order).
inline std::size_t target_feature_index(TargetFeature t) {
  switch (t) {
    case TargetFeature::MissCount: return 0;
    case TargetFeature::MissBytes: return 1;
    case TargetFeature::HitCount: return 2;
    case TargetFeature::HitBytes: return 3;
    case TargetFeature::AvgMissThroughput: return 6;
    default: return 7;
  }
}

inline double feature_value(const BinFeatures& b, std::size_t index) {
  switch (index) {
    case 0: return static_cast<double>(b.miss_count);
    case 1: return static_cast<double>(b.miss_bytes);
    case 2: return static_cast<double>(b.hit_count);
    case 3: return static_cast<double>(b.hit_bytes);
    case 4: return b.agg_miss_throughput;
    case 5: return b.agg_hit_throughput;
    case 6: return b.avg_miss_throughput;
    default: return b.avg_hit_throughput;
  }
}

struct ForecastError : std::runtime_error {
  enum class Kind {
    SeriesTooShort,
    NonContiguousBins,
    NonFiniteData,
    ShapeMismatch,
    NonFiniteActivation,
    StaleCache,
    DivergenceDetected,
    EmptySplit,
  };

  ForecastError(Kind k, const std::string& message, std::size_t idx = 0)
      : std::runtime_error(message), kind(k), index(idx) {}

  Kind kind;
  std::size_t index;  // epoch for DivergenceDetected, bin otherwise
};

struct ForecastConfig {
  std::size_t hidden_units = 128;
  double dropout_rate = 0.04;
  std::size_t epochs = 50;
  std::size_t window_length = 24;
  double train_fraction = 0.8;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::uint64_t rng_seed = 7;
  TargetFeature target = TargetFeature::AvgMissThroughput;

  bool operator==(const ForecastConfig&) const = default;
};

inline std::size_t default_window_length(Granularity g) {
  return g == Granularity::Hourly ? 24 : 7;
}

inline void validate_forecast_config(const ForecastConfig& c) {
  if (c.hidden_units == 0)
    throw ConfigError("forecast: hidden_units must be positive");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0))
    throw ConfigError("forecast: dropout_rate must be in [0,1)");
  if (c.epochs == 0) throw ConfigError("forecast: epochs must be positive");
  if (c.window_length == 0)
    throw ConfigError("forecast: window_length must be positive");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
    throw ConfigError("forecast: train_fraction must be in (0,1)");
  if (!(c.learning_rate > 0.0))
    throw ConfigError("forecast: learning_rate must be positive");
  if (c.batch_size == 0)
    throw ConfigError("forecast: batch_size must be positive");
}

inline nlohmann::json forecast_config_to_json(const ForecastConfig& c) {
  return nlohmann::json{{"hidden_units", c.hidden_units},
                        {"cell_activation", "tanh"},
                        {"dropout_rate", c.dropout_rate},
                        {"epochs", c.epochs},
                        {"window_length", c.window_length},
                        {"train_fraction", c.train_fraction},
                        {"learning_rate", c.learning_rate},
                        {"batch_size", c.batch_size},
                        {"rng_seed", c.rng_seed},
                        {"target", target_name(c.target)}};
}

inline ForecastConfig forecast_config_from_json(const nlohmann::json& j) {
  constexpr const char* ctx = "forecast config";
  ForecastConfig c;
  if (j.contains("hidden_units")) c.hidden_units = detail::json_u64(j, "hidden_units", ctx);
  if (j.contains("cell_activation") &&
      detail::json_string(j, "cell_activation", ctx) != "tanh")
    throw ConfigError("forecast config: only tanh cell activation is supported");
  if (j.contains("dropout_rate")) c.dropout_rate = detail::json_double(j, "dropout_rate", ctx);
  if (j.contains("epochs")) c.epochs = detail::json_u64(j, "epochs", ctx);
  if (j.contains("window_length")) c.window_length = detail::json_u64(j, "window_length", ctx);
  if (j.contains("train_fraction")) c.train_fraction = detail::json_double(j, "train_fraction", ctx);
  if (j.contains("learning_rate")) c.learning_rate = detail::json_double(j, "learning_rate", ctx);
  if (j.contains("batch_size")) c.batch_size = detail::json_u64(j, "batch_size", ctx);
  if (j.contains("rng_seed")) c.rng_seed = detail::json_u64(j, "rng_seed", ctx);
  if (j.contains("target")) {
    auto t = target_from_name(detail::json_string(j, "target", ctx));
    if (!t) throw ConfigError("forecast config: unknown target");
    c.target = *t;
  }
  validate_forecast_config(c);
  return c;
}

// Scaled, windowed samples. Sample i's inputs cover bins [i, i+W) and its
// target is the target series at bin i+W (one-step-ahead). Scaling
// parameters are always the training split's, also on the test dataset.
struct WindowedDataset {
  std::size_t window_length = 0;
  std::size_t num_samples = 0;
  std::vector<double> inputs;   // [sample][step][feature], scaled
  std::vector<double> targets;  // scaled
  std::array<double, kNumFeatures> feature_mins{};
  std::array<double, kNumFeatures> feature_ranges{};
  double target_min = 0.0;
  double target_range = 0.0;
  std::size_t target_feature = 0;
  std::size_t first_target_bin = 0;

  double unscale_target(double v) const { return v * target_range + target_min; }

  const double* sample(std::size_t i) const {
    return inputs.data() + i * window_length * kNumFeatures;
  }
};

// Builds chronological train/test datasets from a bin series, predicting
// `target_series` one step ahead (callers smoothing the target pass the
// smoothed series; inputs always come from the raw bins).
inline std::pair<WindowedDataset, WindowedDataset> build_dataset_with_target(
    std::span<const BinFeatures> bins, const ForecastConfig& config,
    std::span<const double> target_series) {
  validate_forecast_config(config);
  const std::size_t w = config.window_length;
  if (bins.size() < w + 2)
    throw ForecastError(ForecastError::Kind::SeriesTooShort,
                        "need at least window_length + 2 bins, got " +
                            std::to_string(bins.size()));
  if (target_series.size() != bins.size())
    throw ForecastError(ForecastError::Kind::ShapeMismatch,
                        "target series length must match bins");
  const TimeMs step = bin_duration_ms(bins.front().granularity);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i].granularity != bins.front().granularity)
      throw ForecastError(ForecastError::Kind::NonContiguousBins,
                          "mixed granularities at bin " + std::to_string(i), i);
    if (i && bins[i].bin_start != bins[i - 1].bin_start + step)
      throw ForecastError(ForecastError::Kind::NonContiguousBins,
                          "bins are not contiguous at index " + std::to_string(i),
                          i);
    for (std::size_t f = 0; f < kNumFeatures; ++f)
      if (!std::isfinite(feature_value(bins[i], f)))
        throw ForecastError(ForecastError::Kind::NonFiniteData,
                            "non-finite feature at bin " + std::to_string(i), i);
    if (!std::isfinite(target_series[i]))
      throw ForecastError(ForecastError::Kind::NonFiniteData,
                          "non-finite target at bin " + std::to_string(i), i);
  }

  const std::size_t total = bins.size() - w;
  std::size_t n_train = static_cast<std::size_t>(
      std::floor(config.train_fraction * static_cast<double>(total)));
  n_train = std::clamp<std::size_t>(n_train, 1, total - 1);

  WindowedDataset train, test;
  for (auto* ds : {&train, &test}) {
    ds->window_length = w;
    ds->target_feature = target_feature_index(config.target);
  }

  // Scaler statistics come from the training windows only; the last bin a
  // training window can see is n_train + w - 2.
  for (std::size_t f = 0; f < kNumFeatures; ++f) {
    double lo = feature_value(bins[0], f), hi = lo;
    for (std::size_t i = 1; i <= n_train + w - 2; ++i) {
      const double v = feature_value(bins[i], f);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    train.feature_mins[f] = lo;
    train.feature_ranges[f] = hi - lo;
  }
  {
    double lo = target_series[w], hi = lo;
    for (std::size_t i = w; i < w + n_train; ++i) {
      lo = std::min(lo, target_series[i]);
      hi = std::max(hi, target_series[i]);
    }
    train.target_min = lo;
    train.target_range = hi - lo;
  }
  test.feature_mins = train.feature_mins;
  test.feature_ranges = train.feature_ranges;
  test.target_min = train.target_min;
  test.target_range = train.target_range;

  auto scale = [](double v, double lo, double range) {
    return range > 0.0 ? (v - lo) / range : 0.0;
  };
  auto fill = [&](WindowedDataset& ds, std::size_t begin, std::size_t count) {
    ds.num_samples = count;
    ds.first_target_bin = begin + w;
    ds.inputs.resize(count * w * kNumFeatures);
    ds.targets.resize(count);
    for (std::size_t s = 0; s < count; ++s) {
      double* row = ds.inputs.data() + s * w * kNumFeatures;
      for (std::size_t t = 0; t < w; ++t)
        for (std::size_t f = 0; f < kNumFeatures; ++f)
          row[t * kNumFeatures + f] =
              scale(feature_value(bins[begin + s + t], f), ds.feature_mins[f],
                    ds.feature_ranges[f]);
      ds.targets[s] = scale(target_series[begin + s + w], ds.target_min,
                            ds.target_range);
    }
  };
  fill(train, 0, n_train);
  fill(test, n_train, total - n_train);
  return {std::move(train), std::move(test)};
}

inline std::pair<WindowedDataset, WindowedDataset> build_dataset(
    std::span<const BinFeatures> bins, const ForecastConfig& config) {
  std::vector<double> target(bins.size());
  const std::size_t f = target_feature_index(config.target);
  for (std::size_t i = 0; i < bins.size(); ++i)
    target[i] = feature_value(bins[i], f);
  return build_dataset_with_target(bins, config, target);
}

}  // namespace cachecast
