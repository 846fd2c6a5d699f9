#include <catch_amalgamated.hpp>

#include <numbers>
#include <sstream>
#include <stdexcept>

#include "cachecast/cachecast.hpp"
#include "testutil.hpp"

using namespace cachecast;

namespace {

std::vector<BinFeatures> ramp_bins(std::size_t n) {
  std::vector<BinFeatures> bins(n);
  const TimeMs start = make_utc(2021, 7, 1);
  for (std::size_t i = 0; i < n; ++i) {
    bins[i].bin_start = start + TimeMs(i) * kMsPerHour;
    bins[i].granularity = Granularity::Hourly;
    bins[i].miss_count = i;
    bins[i].hit_count = 2 * i;
    bins[i].miss_bytes = 10 * i;
    bins[i].hit_bytes = 20 * i;
    bins[i].agg_miss_throughput = double(10 * i) / 3600.0;
    bins[i].agg_hit_throughput = double(20 * i) / 3600.0;
    bins[i].avg_miss_throughput = 100.0 + double(i);
    bins[i].avg_hit_throughput = 200.0 + double(i);
  }
  return bins;
}

std::vector<BinFeatures> sine_bins(std::size_t n) {
  std::vector<BinFeatures> bins(n);
  const TimeMs start = make_utc(2021, 7, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double tt = double(i);
    const double day = std::sin(2.0 * std::numbers::pi * tt / 24.0);
    const double late = std::sin(2.0 * std::numbers::pi * (tt + 6.0) / 24.0);
    auto& b = bins[i];
    b.bin_start = start + TimeMs(i) * kMsPerHour;
    b.granularity = Granularity::Hourly;
    b.miss_count = std::uint64_t(std::llround(500.0 + 400.0 * day));
    b.hit_count = std::uint64_t(std::llround(800.0 + 300.0 * late));
    b.miss_bytes = b.miss_count * 1000;
    b.hit_bytes = b.hit_count * 500;
    b.agg_miss_throughput = double(b.miss_bytes) / 3600.0;
    b.agg_hit_throughput = double(b.hit_bytes) / 3600.0;
    b.avg_miss_throughput = 1e6 * (1.0 + 0.5 * day);
    b.avg_hit_throughput = 2e6 * (1.0 + 0.25 * late);
  }
  return bins;
}

// Plain per-row scalar recurrence, structured nothing like the batched
// kernels; agreement pins down gate order, recurrence and the head.
template <typename T>
std::vector<double> ref_forward(const LstmParams<T>& p, const std::vector<T>& x,
                                std::size_t B, std::size_t W) {
  const std::size_t H = p.hidden, G = 4 * H;
  std::vector<double> preds(B);
  for (std::size_t bi = 0; bi < B; ++bi) {
    std::vector<double> h(H, 0.0), c(H, 0.0), pre(G);
    for (std::size_t t = 0; t < W; ++t) {
      const T* xt = x.data() + (t * B + bi) * kNumFeatures;
      for (std::size_t j = 0; j < G; ++j) {
        double acc = double(p.b[j]);
        for (std::size_t f = 0; f < kNumFeatures; ++f)
          acc += double(xt[f]) * double(p.w_x[f * G + j]);
        for (std::size_t k = 0; k < H; ++k)
          acc += h[k] * double(p.w_h[k * G + j]);
        pre[j] = acc;
      }
      for (std::size_t j = 0; j < H; ++j) {
        const double gi = 1.0 / (1.0 + std::exp(-pre[j]));
        const double gf = 1.0 / (1.0 + std::exp(-pre[H + j]));
        const double gg = std::tanh(pre[2 * H + j]);
        const double go = 1.0 / (1.0 + std::exp(-pre[3 * H + j]));
        c[j] = gf * c[j] + gi * gg;
        h[j] = go * std::tanh(c[j]);
      }
    }
    double acc = double(p.b_head);
    for (std::size_t j = 0; j < H; ++j) acc += h[j] * double(p.w_head[j]);
    preds[bi] = acc;
  }
  return preds;
}

template <typename T>
LstmParams<T> random_params(std::size_t hidden, std::uint64_t seed) {
  Rng rng(seed);
  auto p = init_lstm_params<T>(hidden, rng);
  p.b_head = T(rng.uniform(-0.5, 0.5));
  return p;
}

std::vector<double> fresh_inputs(std::size_t b, std::size_t w,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(w * b * kNumFeatures);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

}  // namespace

TEST_CASE("glorot init layout") {
  Rng rng(3);
  auto p = init_lstm_params<double>(5, rng);
  CHECK(p.hidden == 5);
  CHECK(p.w_x.size() == kNumFeatures * 20);
  CHECK(p.w_h.size() == 5 * 20);
  CHECK(p.b.size() == 20);
  CHECK(p.w_head.size() == 5);
  // Forget-gate biases start at one, everything else at zero.
  for (std::size_t j = 0; j < 20; ++j)
    CHECK(p.b[j] == (j >= 5 && j < 10 ? 1.0 : 0.0));
  const double lim_x = std::sqrt(6.0 / double(kNumFeatures + 20));
  for (double v : p.w_x) {
    CHECK(v <= lim_x);
    CHECK(v >= -lim_x);
  }
  CHECK(p.b_head == 0.0);
}

TEST_CASE("forward pass matches a scalar reference") {
  for (auto [B, W, H, seed] :
       {std::array<std::size_t, 4>{1, 1, 1, 21},
        std::array<std::size_t, 4>{2, 3, 2, 22},
        std::array<std::size_t, 4>{5, 4, 3, 23},   // odd batch: blocked + tail
        std::array<std::size_t, 4>{8, 6, 16, 24}}) {
    auto p = random_params<double>(H, seed);
    auto x = fresh_inputs(B, W, seed + 100);
    LstmCache<double> cache;
    cache.resize(B, W, H);
    cache.x = x;
    lstm_forward(p, cache);
    auto want = ref_forward(p, x, B, W);
    for (std::size_t i = 0; i < B; ++i)
      CHECK(cache.pred[i] == Catch::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("dropout mask scales only the head input") {
  auto p = random_params<double>(4, 31);
  auto x = fresh_inputs(3, 2, 32);
  LstmCache<double> plain;
  plain.resize(3, 2, 4);
  plain.x = x;
  lstm_forward(p, plain);

  LstmCache<double> masked;
  masked.resize(3, 2, 4);
  masked.x = x;
  masked.mask.assign(3 * 4, 0.0);
  lstm_forward(p, masked);
  CHECK(masked.h == plain.h);  // recurrence unaffected
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(masked.pred[i] == double(p.b_head));  // all-zero mask kills the head

  masked.mask.assign(3 * 4, 2.0);
  lstm_forward(p, masked);
  for (std::size_t i = 0; i < 3 * 4; ++i)
    CHECK(masked.h_drop[i] == Catch::Approx(2.0 * plain.h_drop[i]));
}

TEST_CASE("forward rejects shape and value problems") {
  auto p = random_params<double>(2, 41);
  LstmCache<double> cache;
  cache.resize(2, 3, 4);  // hidden mismatch
  try {
    lstm_forward(p, cache);
    FAIL("expected ForecastError");
  } catch (const ForecastError& e) {
    CHECK(e.kind == ForecastError::Kind::ShapeMismatch);
  }

  cache.resize(2, 3, 2);
  cache.x = fresh_inputs(2, 3, 42);
  p.b_head = std::numeric_limits<double>::infinity();
  try {
    lstm_forward(p, cache);
    FAIL("expected ForecastError");
  } catch (const ForecastError& e) {
    CHECK(e.kind == ForecastError::Kind::NonFiniteActivation);
  }
}

TEST_CASE("backward rejects a stale cache") {
  auto p = random_params<double>(2, 51);
  LstmCache<double> cache;
  cache.resize(1, 2, 2);
  cache.x = fresh_inputs(1, 2, 52);
  lstm_forward(p, cache);
  p.revision += 1;  // simulated optimizer step after the forward pass
  LstmGrads<double> grads;
  std::vector<double> d_pred{1.0};
  try {
    lstm_backward(p, cache, std::span<const double>(d_pred), grads);
    FAIL("expected ForecastError");
  } catch (const ForecastError& e) {
    CHECK(e.kind == ForecastError::Kind::StaleCache);
  }
}

TEST_CASE("bptt gradients match central finite differences") {
  const std::size_t B = 3, W = 5, H = 4;
  const double eps = 1e-5;
  double worst = 0.0;

  for (std::uint64_t seed : {61ull, 62ull, 63ull}) {
    auto params = random_params<double>(H, seed);
    auto x = fresh_inputs(B, W, seed + 10);
    Rng crng(seed + 20);
    std::vector<double> cvec(B);
    for (auto& c : cvec) c = crng.uniform(-1.0, 1.0);

    // Loss is sum(c_i * pred_i), so dLoss/dpred = c.
    auto loss_of = [&](const LstmParams<double>& p) {
      LstmCache<double> cache;
      cache.resize(B, W, H);
      cache.x = x;
      if (seed == 63ull) {  // one config exercises the dropout mask path
        cache.mask.resize(B * H);
        Rng mrng(seed + 30);
        for (auto& m : cache.mask) m = mrng.bernoulli(0.75) ? 1.0 / 0.75 : 0.0;
      }
      lstm_forward(p, cache);
      double loss = 0.0;
      for (std::size_t i = 0; i < B; ++i) loss += cvec[i] * cache.pred[i];
      return loss;
    };

    LstmCache<double> cache;
    cache.resize(B, W, H);
    cache.x = x;
    if (seed == 63ull) {
      cache.mask.resize(B * H);
      Rng mrng(seed + 30);
      for (auto& m : cache.mask) m = mrng.bernoulli(0.75) ? 1.0 / 0.75 : 0.0;
    }
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
  CHECK(worst < 1e-4);
}

TEST_CASE("windowed dataset shapes, alignment and scaling") {
  auto bins = ramp_bins(10);
  ForecastConfig cfg;
  cfg.window_length = 3;
  cfg.target = TargetFeature::MissCount;
  auto [train, test] = build_dataset(bins, cfg);

  // total = 10 - 3 = 7 samples; train = floor(0.8 * 7) = 5.
  CHECK(train.num_samples == 5);
  CHECK(test.num_samples == 2);
  CHECK(train.window_length == 3);
  CHECK(train.first_target_bin == 3);
  CHECK(test.first_target_bin == 8);
  CHECK(train.inputs.size() == 5 * 3 * kNumFeatures);

  // Training targets are the miss_count ramp at bins 3..7, min-max scaled
  // over exactly that range.
  CHECK(train.target_min == 3.0);
  CHECK(train.target_range == 4.0);
  for (std::size_t s = 0; s < 5; ++s)
    CHECK(train.targets[s] == Catch::Approx(double(s) / 4.0));
  // Test reuses the training scaler; values go beyond [0,1].
  CHECK(test.target_min == 3.0);
  CHECK(test.targets[0] == Catch::Approx(1.25));
  CHECK(test.targets[1] == Catch::Approx(1.5));
  CHECK(test.unscale_target(test.targets[1]) == Catch::Approx(9.0));

  // Feature scaler sees bins 0..n_train+w-2 = 0..6 only.
  CHECK(train.feature_mins[0] == 0.0);
  CHECK(train.feature_ranges[0] == 6.0);
  CHECK(test.feature_mins == train.feature_mins);
  // Input window for sample s covers bins s..s+2.
  CHECK(train.sample(1)[0 * kNumFeatures + 0] == Catch::Approx(1.0 / 6.0));
  CHECK(train.sample(1)[2 * kNumFeatures + 0] == Catch::Approx(3.0 / 6.0));
}

TEST_CASE("scaler statistics never leak from the test region") {
  auto bins = ramp_bins(10);
  auto spiked = bins;
  spiked[9].miss_count = 1'000'000;  // test-only outlier
  spiked[9].avg_hit_throughput = 1e15;
  ForecastConfig cfg;
  cfg.window_length = 3;
  cfg.target = TargetFeature::MissCount;
  auto [train_a, test_a] = build_dataset(bins, cfg);
  auto [train_b, test_b] = build_dataset(spiked, cfg);
  CHECK(train_a.feature_mins == train_b.feature_mins);
  CHECK(train_a.feature_ranges == train_b.feature_ranges);
  CHECK(train_a.target_min == train_b.target_min);
  CHECK(train_a.target_range == train_b.target_range);
  CHECK(train_a.inputs == train_b.inputs);
}

TEST_CASE("dataset construction rejects bad series") {
  ForecastConfig cfg;
  cfg.window_length = 3;
  auto kind_of = [&](const std::vector<BinFeatures>& bins) {
    try {
      build_dataset(bins, cfg);
    } catch (const ForecastError& e) {
      return e.kind;
    }
    throw std::logic_error("expected ForecastError");
  };

  CHECK(kind_of(ramp_bins(4)) == ForecastError::Kind::SeriesTooShort);

  auto gap = ramp_bins(10);
  gap[4].bin_start += 1;
  CHECK(kind_of(gap) == ForecastError::Kind::NonContiguousBins);

  auto mixed = ramp_bins(10);
  mixed[3].granularity = Granularity::Daily;
  CHECK(kind_of(mixed) == ForecastError::Kind::NonContiguousBins);

  auto nan = ramp_bins(10);
  nan[2].avg_hit_throughput = std::numeric_limits<double>::quiet_NaN();
  try {
    build_dataset(nan, cfg);
    FAIL("expected ForecastError");
  } catch (const ForecastError& e) {
    CHECK(e.kind == ForecastError::Kind::NonFiniteData);
    CHECK(e.index == 2);
  }

  auto bins = ramp_bins(10);
  std::vector<double> short_target(9, 0.0);
  CHECK_THROWS_AS(build_dataset_with_target(bins, cfg, short_target),
                  ForecastError);
}

TEST_CASE("predict is independent of batching") {
  auto bins = sine_bins(120);
  ForecastConfig cfg;
  cfg.hidden_units = 8;
  cfg.epochs = 2;
  cfg.target = TargetFeature::MissCount;
  auto [train_ds, test_ds] = build_dataset(bins, cfg);
  auto [params, history] = train<float>(train_ds, cfg);
  CHECK(history.epoch_rmse.size() == 2);
  CHECK(predict(params, train_ds, 64) == predict(params, train_ds, 1));
  CHECK(predict(params, train_ds, 7) == predict(params, train_ds, 96));
}

TEST_CASE("training is deterministic in the seed") {
  auto bins = sine_bins(80);
  ForecastConfig cfg;
  cfg.hidden_units = 6;
  cfg.epochs = 3;
  cfg.target = TargetFeature::MissCount;
  auto [train_ds, test_ds] = build_dataset(bins, cfg);
  auto [p1, h1] = train<float>(train_ds, cfg);
  auto [p2, h2] = train<float>(train_ds, cfg);
  CHECK(p1.w_x == p2.w_x);
  CHECK(p1.w_h == p2.w_h);
  CHECK(p1.b == p2.b);
  CHECK(p1.w_head == p2.w_head);
  CHECK(h1.epoch_rmse == h2.epoch_rmse);

  cfg.rng_seed += 1;
  auto [p3, h3] = train<float>(train_ds, cfg);
  CHECK(p1.w_x != p3.w_x);
}

TEST_CASE("a constant series is learned exactly") {
  auto bins = ramp_bins(40);
  for (auto& b : bins) b.avg_miss_throughput = 123.5;  // constant target
  ForecastConfig cfg;
  cfg.hidden_units = 4;
  cfg.epochs = 1;
  cfg.window_length = 5;
  cfg.target = TargetFeature::AvgMissThroughput;
  auto run = run_forecast(bins, cfg);
  CHECK(run.eval.train_rmse == 0.0);
  CHECK(run.eval.test_rmse == 0.0);
  CHECK(run.eval.series_std == 0.0);
  CHECK(run.eval.relative_rmse == 0.0);
  for (double p : run.test_predicted) CHECK(p == 123.5);
}

TEST_CASE("a clean daily cycle is forecast with skill") {
  auto bins = sine_bins(400);
  ForecastConfig cfg;
  cfg.hidden_units = 32;
  cfg.epochs = 40;
  cfg.target = TargetFeature::MissCount;
  auto run = run_forecast(bins, cfg);
  CHECK(run.eval.relative_rmse < 0.2);
  CHECK(run.eval.test_rmse < run.eval.series_std);
  // History should show the optimizer actually descending.
  CHECK(run.history.epoch_rmse.back() < run.history.epoch_rmse.front());
}

TEST_CASE("training reports divergence rather than emitting garbage") {
  WindowedDataset ds;
  ds.window_length = 2;
  ds.num_samples = 2;
  ds.inputs.assign(2 * 2 * kNumFeatures, 0.5);
  ds.targets = {1e200, 1e200};  // squared error overflows any finite pred
  ds.target_range = 1.0;
  ForecastConfig cfg;
  cfg.hidden_units = 2;
  cfg.epochs = 1;
  cfg.window_length = 2;
  try {
    train<float>(ds, cfg);
    FAIL("expected ForecastError");
  } catch (const ForecastError& e) {
    CHECK(e.kind == ForecastError::Kind::DivergenceDetected);
    CHECK(e.index == 0);  // first epoch
  }

  WindowedDataset empty;
  CHECK_THROWS_AS(train<float>(empty, cfg), ForecastError);
}

TEST_CASE("smoothing window one is the identity pipeline") {
  auto bins = sine_bins(120);
  ForecastConfig cfg;
  cfg.hidden_units = 8;
  cfg.epochs = 3;
  cfg.target = TargetFeature::MissCount;
  auto plain = run_forecast(bins, cfg);
  auto smoothed = forecast_smoothed(bins, cfg, 1);
  CHECK(smoothed.eval.test_rmse == plain.eval.test_rmse);
  CHECK(smoothed.eval.train_rmse == plain.eval.train_rmse);
  CHECK(smoothed.params.w_x == plain.params.w_x);
  CHECK(smoothed.raw_test_rmse == Catch::Approx(smoothed.eval.test_rmse));
  CHECK(smoothed.test_actual == plain.test_actual);
}

TEST_CASE("moving average reduces series variance on the spiky benchmark") {
  auto bins = spiky_telemetry_hourly(600, 9001);
  std::vector<double> raw(bins.size());
  for (std::size_t i = 0; i < bins.size(); ++i)
    raw[i] = bins[i].avg_miss_throughput;
  for (std::size_t w : {std::size_t(24), std::size_t(168)})
    CHECK(std_dev(moving_average(raw, w)) <= std_dev(raw));
}

TEST_CASE("forecast config json round-trip and validation") {
  ForecastConfig c;
  c.hidden_units = 17;
  c.dropout_rate = 0.1;
  c.epochs = 9;
  c.window_length = 7;
  c.train_fraction = 0.75;
  c.learning_rate = 5e-4;
  c.batch_size = 16;
  c.rng_seed = 99;
  c.target = TargetFeature::HitBytes;
  CHECK(forecast_config_from_json(forecast_config_to_json(c)) == c);

  auto j = forecast_config_to_json(c);
  j["cell_activation"] = "relu";
  CHECK_THROWS_AS(forecast_config_from_json(j), ConfigError);
  j = nlohmann::json::object();  // all defaults
  CHECK(forecast_config_from_json(j) == ForecastConfig{});

  ForecastConfig bad;
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(validate_forecast_config(bad), ConfigError);
  bad = ForecastConfig{};
  bad.train_fraction = 1.0;
  CHECK_THROWS_AS(validate_forecast_config(bad), ConfigError);
  bad = ForecastConfig{};
  bad.hidden_units = 0;
  CHECK_THROWS_AS(validate_forecast_config(bad), ConfigError);

  CHECK(default_window_length(Granularity::Hourly) == 24);
  CHECK(default_window_length(Granularity::Daily) == 7);
  CHECK(target_from_name("miss_bytes") == TargetFeature::MissBytes);
  CHECK_FALSE(target_from_name("agg_miss_tput").has_value());  // input only
  for (auto t : kAllTargets) CHECK(target_from_name(target_name(t)) == t);
}

TEST_CASE("model file round-trips exactly") {
  auto bins = sine_bins(100);
  ForecastConfig cfg;
  cfg.hidden_units = 8;
  cfg.epochs = 2;
  cfg.target = TargetFeature::HitCount;
  auto run = forecast_smoothed(bins, cfg, 4);

  std::ostringstream out;
  save_model(run, out);
  std::istringstream in(out.str());
  auto loaded = load_model(in);

  CHECK(loaded.target == TargetFeature::HitCount);
  CHECK(loaded.granularity == Granularity::Hourly);
  CHECK(loaded.smoothing_window == 4);
  CHECK(loaded.window_length == cfg.window_length);
  CHECK(loaded.params.hidden == 8);
  CHECK(loaded.params.w_x == run.params.w_x);
  CHECK(loaded.params.w_h == run.params.w_h);
  CHECK(loaded.params.b == run.params.b);
  CHECK(loaded.params.w_head == run.params.w_head);
  CHECK(loaded.params.b_head == run.params.b_head);
  CHECK(loaded.feature_mins == run.feature_mins);
  CHECK(loaded.feature_ranges == run.feature_ranges);
  CHECK(loaded.target_min == run.target_min);
  CHECK(loaded.target_range == run.target_range);

  std::istringstream bad("not-a-model 1\n");
  CHECK_THROWS_AS(load_model(bad), ConfigError);
  std::string truncated = out.str().substr(0, out.str().size() / 2);
  std::istringstream trunc(truncated);
  CHECK_THROWS_AS(load_model(trunc), ConfigError);
}

TEST_CASE("evaluation csv round-trips") {
  auto bins = sine_bins(100);
  ForecastConfig cfg;
  cfg.hidden_units = 4;
  cfg.epochs = 1;
  cfg.target = TargetFeature::MissCount;
  std::vector<ForecastRun> runs;
  runs.push_back(forecast_smoothed(bins, cfg, 1));
  runs.push_back(forecast_smoothed(bins, cfg, 24));

  std::ostringstream out;
  write_eval_csv(runs, out);
  std::istringstream in(out.str());
  auto rows = read_eval_csv(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].target == "miss_count");
  CHECK(rows[0].granularity == "hourly");
  CHECK(rows[0].smoothing_window == 1);
  CHECK(rows[1].smoothing_window == 24);
  CHECK(rows[0].test_rmse == runs[0].eval.test_rmse);
  CHECK(rows[1].relative_rmse == runs[1].eval.relative_rmse);

  std::istringstream bad("target,oops\n");
  CHECK_THROWS_AS(read_eval_csv(bad), ConfigError);
}
