#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cachecast/aggregate.hpp"
#include "cachecast/forecast/dataset.hpp"
#include "cachecast/forecast/lstm.hpp"
#include "cachecast/rng.hpp"

namespace cachecast {

struct TrainHistory {
  // Per-epoch training RMSE in unscaled target units, measured from the
  // minibatch predictions made during the epoch.
  std::vector<double> epoch_rmse;
};

namespace detail {

template <typename T>
struct AdamState {
  std::vector<T> m, v;
  explicit AdamState(std::size_t n) : m(n, T(0)), v(n, T(0)) {}
};

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, AdamState<T>& s,
                 double lr, double t) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const double corr1 = 1.0 - std::pow(kBeta1, t);
  const double corr2 = 1.0 - std::pow(kBeta2, t);
  const double step = lr / corr1;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    const double m = kBeta1 * static_cast<double>(s.m[i]) + (1.0 - kBeta1) * g;
    const double v = kBeta2 * static_cast<double>(s.v[i]) + (1.0 - kBeta2) * g * g;
    s.m[i] = static_cast<T>(m);
    s.v[i] = static_cast<T>(v);
    param[i] -= static_cast<T>(step * m / (std::sqrt(v / corr2) + kEps));
  }
}

}  // namespace detail

// Copies sample windows into the step-major batch buffer expected by
// lstm_forward.
template <typename T>
void fill_batch_inputs(const WindowedDataset& ds,
                       std::span<const std::size_t> sample_ids,
                       LstmCache<T>& cache) {
  const std::size_t w = ds.window_length;
  for (std::size_t bi = 0; bi < sample_ids.size(); ++bi) {
    const double* src = ds.sample(sample_ids[bi]);
    for (std::size_t t = 0; t < w; ++t)
      for (std::size_t f = 0; f < kNumFeatures; ++f)
        cache.x[(t * sample_ids.size() + bi) * kNumFeatures + f] =
            static_cast<T>(src[t * kNumFeatures + f]);
  }
}

// Inference over an entire dataset; returns predictions in unscaled units.
template <typename T>
std::vector<double> predict(const LstmParams<T>& params,
                            const WindowedDataset& ds,
                            std::size_t batch_size = 64) {
  std::vector<double> out(ds.num_samples);
  LstmCache<T> cache;
  std::vector<std::size_t> ids;
  for (std::size_t begin = 0; begin < ds.num_samples; begin += batch_size) {
    const std::size_t count = std::min(batch_size, ds.num_samples - begin);
    ids.resize(count);
    for (std::size_t i = 0; i < count; ++i) ids[i] = begin + i;
    cache.resize(count, ds.window_length, params.hidden);
    cache.mask.clear();
    fill_batch_inputs(ds, ids, cache);
    lstm_forward(params, cache);
    for (std::size_t i = 0; i < count; ++i)
      out[begin + i] = ds.unscale_target(static_cast<double>(cache.pred[i]));
  }
  return out;
}

// Mini-batch training with adaptive-moment updates. Deterministic per
// config.rng_seed: the init, shuffle and dropout streams are all derived
// from it.
template <typename T = float>
std::pair<LstmParams<T>, TrainHistory> train(const WindowedDataset& ds,
                                             const ForecastConfig& config) {
  validate_forecast_config(config);
  if (ds.num_samples == 0)
    throw ForecastError(ForecastError::Kind::EmptySplit,
                        "training dataset is empty");

  Rng init_rng(derive_seed(config.rng_seed, 0x11));
  Rng shuffle_rng(derive_seed(config.rng_seed, 0x22));
  Rng dropout_rng(derive_seed(config.rng_seed, 0x33));

  auto params = init_lstm_params<T>(config.hidden_units, init_rng);
  detail::AdamState<T> s_wx(params.w_x.size()), s_wh(params.w_h.size()),
      s_b(params.b.size()), s_head(params.w_head.size()), s_bh(1);

  const std::size_t n = ds.num_samples;
  const std::size_t bs = std::min(config.batch_size, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  LstmCache<T> cache;
  LstmGrads<T> grads;
  std::vector<T> d_pred;
  TrainHistory history;
  history.epoch_rmse.reserve(config.epochs);
  const double keep = 1.0 - config.dropout_rate;
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double sq_err = 0.0;
    for (std::size_t begin = 0; begin < n; begin += bs) {
      const std::size_t count = std::min(bs, n - begin);
      cache.resize(count, ds.window_length, params.hidden);
      if (config.dropout_rate > 0.0) {
        cache.mask.resize(count * params.hidden);
        for (auto& m : cache.mask)
          m = dropout_rng.bernoulli(keep) ? static_cast<T>(1.0 / keep) : T(0);
      } else {
        cache.mask.clear();
      }
      fill_batch_inputs(ds, std::span(order).subspan(begin, count), cache);
      lstm_forward(params, cache);

      d_pred.resize(count);
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        const double y = ds.targets[order[begin + i]];
        const double diff = static_cast<double>(cache.pred[i]) - y;
        batch_loss += diff * diff;
        d_pred[i] = static_cast<T>(2.0 * diff / static_cast<double>(count));
        const double raw_diff = ds.unscale_target(cache.pred[i]) -
                                ds.unscale_target(y);
        sq_err += raw_diff * raw_diff;
      }
      if (!std::isfinite(batch_loss))
        throw ForecastError(ForecastError::Kind::DivergenceDetected,
                            "non-finite loss at epoch " + std::to_string(epoch),
                            epoch);

      lstm_backward(params, cache, std::span<const T>(d_pred), grads);
      const double t = static_cast<double>(++step);
      detail::adam_update<T>(params.w_x, grads.w_x, s_wx, config.learning_rate, t);
      detail::adam_update<T>(params.w_h, grads.w_h, s_wh, config.learning_rate, t);
      detail::adam_update<T>(params.b, grads.b, s_b, config.learning_rate, t);
      detail::adam_update<T>(params.w_head, grads.w_head, s_head,
                             config.learning_rate, t);
      std::span<T> bh(&params.b_head, 1);
      std::span<const T> gbh(&grads.b_head, 1);
      detail::adam_update<T>(bh, gbh, s_bh, config.learning_rate, t);
      params.revision += 1;
    }
    history.epoch_rmse.push_back(std::sqrt(sq_err / static_cast<double>(n)));
  }
  return {std::move(params), std::move(history)};
}

struct EvalReport {
  double train_rmse = 0.0;
  double test_rmse = 0.0;
  double series_std = 0.0;       // sigma of the full raw target series
  double test_series_std = 0.0;  // sigma of the raw test targets alone
  double relative_rmse = 0.0;    // test_rmse / series_std
};

template <typename T>
EvalReport evaluate(const LstmParams<T>& params, const WindowedDataset& train_ds,
                    const WindowedDataset& test_ds) {
  if (train_ds.num_samples == 0 || test_ds.num_samples == 0)
    throw ForecastError(ForecastError::Kind::EmptySplit,
                        "evaluate requires non-empty train and test splits");

  auto raw_targets = [](const WindowedDataset& ds) {
    std::vector<double> out(ds.num_samples);
    for (std::size_t i = 0; i < ds.num_samples; ++i)
      out[i] = ds.unscale_target(ds.targets[i]);
    return out;
  };
  const auto train_y = raw_targets(train_ds);
  const auto test_y = raw_targets(test_ds);
  const auto train_p = predict(params, train_ds);
  const auto test_p = predict(params, test_ds);

  EvalReport report;
  report.train_rmse = rmse(train_p, train_y);
  report.test_rmse = rmse(test_p, test_y);
  std::vector<double> full = train_y;
  full.insert(full.end(), test_y.begin(), test_y.end());
  report.series_std = std_dev(full);
  report.test_series_std = test_y.size() >= 2 ? std_dev(test_y) : 0.0;
  report.relative_rmse =
      report.series_std > 0.0 ? report.test_rmse / report.series_std : 0.0;
  return report;
}

// One full forecasting run. smoothing_window 1 is the identity pipeline; a
// larger window trains and evaluates against the moving-averaged target
// while inputs stay unsmoothed. raw_test_rmse scores this model's
// predictions against the unsmoothed target for comparison.
struct ForecastRun {
  ForecastConfig config;
  std::size_t smoothing_window = 1;
  Granularity granularity = Granularity::Hourly;
  LstmParams<float> params;
  TrainHistory history;
  EvalReport eval;
  double raw_test_rmse = 0.0;
  std::array<double, kNumFeatures> feature_mins{};
  std::array<double, kNumFeatures> feature_ranges{};
  double target_min = 0.0;
  double target_range = 0.0;
  std::vector<TimeMs> test_bin_starts;
  std::vector<double> test_actual;
  std::vector<double> test_predicted;
};

inline ForecastRun forecast_smoothed(std::span<const BinFeatures> bins,
                                     const ForecastConfig& config,
                                     std::size_t smoothing_window) {
  std::vector<double> raw(bins.size());
  const std::size_t f = target_feature_index(config.target);
  for (std::size_t i = 0; i < bins.size(); ++i)
    raw[i] = feature_value(bins[i], f);
  const auto smoothed = moving_average(raw, smoothing_window);

  auto [train_ds, test_ds] = build_dataset_with_target(bins, config, smoothed);

  ForecastRun run;
  run.config = config;
  run.smoothing_window = smoothing_window;
  run.granularity = bins.front().granularity;
  auto [params, history] = train<float>(train_ds, config);
  run.params = std::move(params);
  run.history = std::move(history);
  run.eval = evaluate(run.params, train_ds, test_ds);
  run.feature_mins = train_ds.feature_mins;
  run.feature_ranges = train_ds.feature_ranges;
  run.target_min = train_ds.target_min;
  run.target_range = train_ds.target_range;

  const auto test_p = predict(run.params, test_ds);
  double raw_sq = 0.0;
  run.test_bin_starts.reserve(test_ds.num_samples);
  run.test_actual.reserve(test_ds.num_samples);
  run.test_predicted.reserve(test_ds.num_samples);
  for (std::size_t i = 0; i < test_ds.num_samples; ++i) {
    const std::size_t bin = test_ds.first_target_bin + i;
    run.test_bin_starts.push_back(bins[bin].bin_start);
    run.test_actual.push_back(smoothed[bin]);
    run.test_predicted.push_back(test_p[i]);
    const double d = test_p[i] - raw[bin];
    raw_sq += d * d;
  }
  run.raw_test_rmse =
      std::sqrt(raw_sq / static_cast<double>(test_ds.num_samples));
  return run;
}

inline ForecastRun run_forecast(std::span<const BinFeatures> bins,
                                const ForecastConfig& config) {
  return forecast_smoothed(bins, config, 1);
}

inline constexpr std::string_view kEvalCsvHeader =
    "target,granularity,smoothing_window,train_rmse,test_rmse,series_std,"
    "relative_rmse";

inline void write_eval_csv(std::span<const ForecastRun> runs,
                           std::ostream& out) {
  out << kEvalCsvHeader << '\n';
  for (const auto& r : runs) {
    out << target_name(r.config.target) << ',' << granularity_name(r.granularity)
        << ',' << r.smoothing_window << ','
        << detail::format_double(r.eval.train_rmse) << ','
        << detail::format_double(r.eval.test_rmse) << ','
        << detail::format_double(r.eval.series_std) << ','
        << detail::format_double(r.eval.relative_rmse) << '\n';
  }
}

struct EvalRow {
  std::string target;
  std::string granularity;
  std::uint64_t smoothing_window = 1;
  double train_rmse = 0.0;
  double test_rmse = 0.0;
  double series_std = 0.0;
  double relative_rmse = 0.0;
};

inline std::vector<EvalRow> read_eval_csv(std::istream& in) {
  CsvReader reader(in);
  std::vector<std::string> fields;
  std::vector<EvalRow> rows;
  bool saw_header = false;
  while (reader.next_record(fields)) {
    if (!saw_header) {
      saw_header = true;
      std::string joined;
      for (std::size_t i = 0; i < fields.size(); ++i)
        joined += (i ? "," : "") + fields[i];
      if (joined != kEvalCsvHeader)
        throw ConfigError("evaluation csv: unexpected header '" + joined + "'");
      continue;
    }
    if (fields.size() != 7)
      throw ConfigError("evaluation csv line " + std::to_string(reader.line()) +
                        ": expected 7 fields");
    EvalRow row;
    row.target = fields[0];
    row.granularity = fields[1];
    auto w = detail::parse_u64(fields[2]);
    auto f3 = detail::parse_double(fields[3]);
    auto f4 = detail::parse_double(fields[4]);
    auto f5 = detail::parse_double(fields[5]);
    auto f6 = detail::parse_double(fields[6]);
    if (!w || !f3 || !f4 || !f5 || !f6)
      throw ConfigError("evaluation csv line " + std::to_string(reader.line()) +
                        ": bad numeric field");
    row.smoothing_window = *w;
    row.train_rmse = *f3;
    row.test_rmse = *f4;
    row.series_std = *f5;
    row.relative_rmse = *f6;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cachecast
