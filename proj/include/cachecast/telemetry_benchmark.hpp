#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "cachecast/aggregate.hpp"
#include "cachecast/rng.hpp"
#include "cachecast/time.hpp"

namespace cachecast {

namespace detail {

// First-order autoregressive noise, unit-ish scale.
class Ar1 {
 public:
  Ar1(double phi, double innovation_sigma, std::uint64_t seed)
      : phi_(phi), sigma_(innovation_sigma), rng_(seed) {}

  double next() {
    state_ = phi_ * state_ + sigma_ * rng_.normal();
    return state_;
  }

 private:
  double phi_;
  double sigma_;
  double state_ = 0.0;
  Rng rng_;
};

inline std::uint64_t to_count(double v) {
  if (!(v > 0.0)) return 0;
  return static_cast<std::uint64_t>(std::llround(v));
}

}  // namespace detail

// Campaign-shaped hourly telemetry: daily and weekly cycles, a months-long
// mid-series episode of elevated misses and larger transfers, and mild AR(1)
// noise on every channel. All eight features are mutually consistent
// (aggregate throughputs are exactly bytes per bin duration).
inline std::vector<BinFeatures> synthetic_telemetry_hourly(std::size_t n_bins,
                                                           std::uint64_t seed) {
  const TimeMs start = make_utc(2021, 7, 1);
  const double a = 0.35 * static_cast<double>(n_bins);
  const double b = 0.75 * static_cast<double>(n_bins);
  constexpr double kRamp = 36.0;

  detail::Ar1 z_miss(0.8, 0.6, derive_seed(seed, 1));
  detail::Ar1 z_hit(0.8, 0.6, derive_seed(seed, 2));
  detail::Ar1 z_size(0.85, 0.5, derive_seed(seed, 3));
  detail::Ar1 z_mtput(0.85, 0.5, derive_seed(seed, 4));
  detail::Ar1 z_htput(0.85, 0.5, derive_seed(seed, 5));

  std::vector<BinFeatures> bins(n_bins);
  for (std::size_t t = 0; t < n_bins; ++t) {
    const double tt = static_cast<double>(t);
    const double daily = std::sin(2.0 * std::numbers::pi * tt / 24.0);
    const double daily_late = std::sin(2.0 * std::numbers::pi * (tt + 6.0) / 24.0);
    const double weekly = std::sin(2.0 * std::numbers::pi * tt / 168.0);
    const double campaign = 1.0 / (1.0 + std::exp(-(tt - a) / kRamp)) -
                            1.0 / (1.0 + std::exp(-(tt - b) / kRamp));

    auto& bin = bins[t];
    bin.bin_start = start + static_cast<TimeMs>(t) * kMsPerHour;
    bin.granularity = Granularity::Hourly;

    const double miss_level =
        600.0 + 140.0 * daily + 60.0 * weekly + 900.0 * campaign +
        45.0 * z_miss.next();
    const double hit_level =
        1300.0 + 300.0 * daily_late + 80.0 * weekly - 250.0 * campaign +
        60.0 * z_hit.next();
    bin.miss_count = detail::to_count(miss_level);
    bin.hit_count = detail::to_count(hit_level);

    const double size_wave = z_size.next();
    const double miss_size =
        1.8e8 * (1.0 + 0.8 * campaign + 0.15 * daily_late + 0.05 * size_wave);
    const double hit_size = 6.0e7 * (1.0 + 0.1 * weekly + 0.04 * size_wave);
    bin.miss_bytes =
        detail::to_count(static_cast<double>(bin.miss_count) * miss_size);
    bin.hit_bytes =
        detail::to_count(static_cast<double>(bin.hit_count) * hit_size);
    bin.agg_miss_throughput = static_cast<double>(bin.miss_bytes) / 3600.0;
    bin.agg_hit_throughput = static_cast<double>(bin.hit_bytes) / 3600.0;

    bin.avg_miss_throughput =
        1.1e8 * (1.0 + 0.5 * campaign + 0.2 * daily + 0.06 * z_mtput.next());
    bin.avg_hit_throughput =
        4.5e8 * (1.0 + 0.1 * weekly + 0.05 * daily_late +
                 0.04 * z_htput.next());
  }
  return bins;
}

// Spiky hourly benchmark: daily and weekly cycles on the miss-throughput
// channel plus heavy-tailed one-bin bursts at random hours. One-step-ahead
// prediction of the raw series pays for every unpredictable burst;
// moving-averaged targets dilute them, and the day/week periods divide the
// smoothing windows so each cycle drops out of the matching average.
inline std::vector<BinFeatures> spiky_telemetry_hourly(std::size_t n_bins,
                                                       std::uint64_t seed) {
  const TimeMs start = make_utc(2021, 7, 1);
  Rng spike_rng(derive_seed(seed, 11));
  Rng noise_rng(derive_seed(seed, 12));
  detail::Ar1 z_cnt(0.7, 0.4, derive_seed(seed, 13));

  std::vector<BinFeatures> bins(n_bins);
  for (std::size_t t = 0; t < n_bins; ++t) {
    const double tt = static_cast<double>(t);
    const double daily = std::sin(2.0 * std::numbers::pi * tt / 24.0);
    const double weekly = std::sin(2.0 * std::numbers::pi * tt / 168.0);

    // One uniform and one lognormal draw per bin keeps the stream aligned
    // whether or not a spike fires.
    const bool fire = spike_rng.uniform01() < 1.0 / 36.0;
    const double amp = 1.1e7 * spike_rng.lognormal(0.0, 1.1);
    const double spike = fire ? amp : 0.0;

    auto& bin = bins[t];
    bin.bin_start = start + static_cast<TimeMs>(t) * kMsPerHour;
    bin.granularity = Granularity::Hourly;

    const double base = 2.0e8 * (1.0 + 0.35 * daily + 0.28 * weekly);
    bin.avg_miss_throughput = base + spike + 3.0e6 * noise_rng.normal();
    bin.avg_hit_throughput = 3.0e8 * (1.0 + 0.2 * daily + 0.05 * weekly);

    const double miss_level = 400.0 + 90.0 * daily + 25.0 * z_cnt.next();
    const double hit_level = 900.0 + 180.0 * daily;
    bin.miss_count = detail::to_count(miss_level);
    bin.hit_count = detail::to_count(hit_level);
    bin.miss_bytes = detail::to_count(static_cast<double>(bin.miss_count) * 1.5e8);
    bin.hit_bytes = detail::to_count(static_cast<double>(bin.hit_count) * 5.0e7);
    bin.agg_miss_throughput = static_cast<double>(bin.miss_bytes) / 3600.0;
    bin.agg_hit_throughput = static_cast<double>(bin.hit_bytes) / 3600.0;
  }
  return bins;
}

}  // namespace cachecast
