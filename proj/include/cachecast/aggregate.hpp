#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cachecast/csv.hpp"
#include "cachecast/time.hpp"
#include "cachecast/trace.hpp"

namespace cachecast {

enum class Granularity { Hourly, Daily };

inline const char* granularity_name(Granularity g) {
  return g == Granularity::Hourly ? "hourly" : "daily";
}

inline std::optional<Granularity> granularity_from_name(std::string_view s) {
  if (s == "hourly") return Granularity::Hourly;
  if (s == "daily") return Granularity::Daily;
  return std::nullopt;
}

inline TimeMs bin_duration_ms(Granularity g) {
  return g == Granularity::Hourly ? kMsPerHour : kMsPerDay;
}

inline TimeMs floor_to_bin(TimeMs t, Granularity g) {
  return g == Granularity::Hourly ? floor_to_hour(t) : floor_to_day(t);
}

// One time bin of the model's eight input features.
//   agg_*_throughput: total bytes in the bin over the bin duration.
//   avg_*_throughput: mean over transfers of size/transfer_time.
struct BinFeatures {
  TimeMs bin_start = 0;
  Granularity granularity = Granularity::Hourly;
  std::uint64_t miss_count = 0;
  std::uint64_t miss_bytes = 0;
  std::uint64_t hit_count = 0;
  std::uint64_t hit_bytes = 0;
  double agg_miss_throughput = 0.0;
  double agg_hit_throughput = 0.0;
  double avg_miss_throughput = 0.0;
  double avg_hit_throughput = 0.0;

  bool operator==(const BinFeatures&) const = default;
};

struct SummaryStats {
  std::uint64_t total_accesses = 0;
  std::uint64_t total_hits = 0;
  std::uint64_t total_misses = 0;
  std::uint64_t hit_bytes = 0;
  std::uint64_t miss_bytes = 0;
  double file_hit_rate = 0.0;
  double byte_hit_rate = 0.0;

  bool operator==(const SummaryStats&) const = default;
};

struct AggregateError : std::runtime_error {
  enum class Kind {
    EmptyTrace,
    UnknownOutcomePresent,
    ZeroWindow,
    LengthMismatch,
    EmptySequences,
    TooFewPoints,
    NonPositiveDuration,
  };

  AggregateError(Kind k, const std::string& message, std::size_t idx = 0)
      : std::runtime_error(message), kind(k), index(idx) {}

  Kind kind;
  std::size_t index;
};

inline double per_transfer_throughput(std::uint64_t size_bytes,
                                      double transfer_seconds) {
  if (!(transfer_seconds > 0.0))
    throw AggregateError(AggregateError::Kind::NonPositiveDuration,
                         "transfer duration must be > 0");
  return static_cast<double>(size_bytes) / transfer_seconds;
}

// Bins a resolved trace into a gap-free series from the first record's bin to
// the last record's bin; interior bins with no traffic are zero rows.
inline std::vector<BinFeatures> bin_trace(const Trace& trace, Granularity g) {
  if (trace.records.empty())
    throw AggregateError(AggregateError::Kind::EmptyTrace,
                         "cannot bin an empty trace");
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    if (trace.records[i].outcome == Outcome::Unknown)
      throw AggregateError(AggregateError::Kind::UnknownOutcomePresent,
                           "record " + std::to_string(i) +
                               " has unknown outcome; simulate it first",
                           i);
  }

  const TimeMs dur = bin_duration_ms(g);
  const TimeMs first = floor_to_bin(trace.records.front().ts, g);
  const TimeMs last = floor_to_bin(trace.records.back().ts, g);
  const std::size_t n = static_cast<std::size_t>((last - first) / dur) + 1;

  std::vector<BinFeatures> bins(n);
  std::vector<double> miss_tput_sum(n, 0.0), hit_tput_sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    bins[i].bin_start = first + static_cast<TimeMs>(i) * dur;
    bins[i].granularity = g;
  }

  for (const auto& r : trace.records) {
    const auto idx =
        static_cast<std::size_t>((floor_to_bin(r.ts, g) - first) / dur);
    auto& b = bins[idx];
    const double tput = per_transfer_throughput(r.size_bytes, *r.transfer_seconds);
    if (r.outcome == Outcome::Miss) {
      b.miss_count += 1;
      b.miss_bytes += r.size_bytes;
      miss_tput_sum[idx] += tput;
    } else {
      b.hit_count += 1;
      b.hit_bytes += r.size_bytes;
      hit_tput_sum[idx] += tput;
    }
  }

  const double dur_seconds = static_cast<double>(dur) / 1000.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& b = bins[i];
    b.agg_miss_throughput = static_cast<double>(b.miss_bytes) / dur_seconds;
    b.agg_hit_throughput = static_cast<double>(b.hit_bytes) / dur_seconds;
    b.avg_miss_throughput =
        b.miss_count ? miss_tput_sum[i] / static_cast<double>(b.miss_count) : 0.0;
    b.avg_hit_throughput =
        b.hit_count ? hit_tput_sum[i] / static_cast<double>(b.hit_count) : 0.0;
  }
  return bins;
}

// Element-wise merge of two bins covering the same interval: counts and bytes
// add, per-transfer averages recombine by count-weighted mean. This is the
// associative merge that makes sharded aggregation legal.
inline BinFeatures merge_bins(const BinFeatures& a, const BinFeatures& b) {
  if (a.bin_start != b.bin_start || a.granularity != b.granularity)
    throw AggregateError(AggregateError::Kind::LengthMismatch,
                         "merge_bins requires identical bin boundaries");
  BinFeatures out = a;
  out.miss_count += b.miss_count;
  out.miss_bytes += b.miss_bytes;
  out.hit_count += b.hit_count;
  out.hit_bytes += b.hit_bytes;
  out.agg_miss_throughput += b.agg_miss_throughput;
  out.agg_hit_throughput += b.agg_hit_throughput;
  const auto wmean = [](std::uint64_t ca, double va, std::uint64_t cb,
                        double vb) {
    const std::uint64_t c = ca + cb;
    if (c == 0) return 0.0;
    return (static_cast<double>(ca) * va + static_cast<double>(cb) * vb) /
           static_cast<double>(c);
  };
  out.avg_miss_throughput =
      wmean(a.miss_count, a.avg_miss_throughput, b.miss_count, b.avg_miss_throughput);
  out.avg_hit_throughput =
      wmean(a.hit_count, a.avg_hit_throughput, b.hit_count, b.avg_hit_throughput);
  return out;
}

inline SummaryStats summarize(const Trace& trace) {
  if (trace.records.empty())
    throw AggregateError(AggregateError::Kind::EmptyTrace,
                         "cannot summarize an empty trace");
  SummaryStats s;
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    if (r.outcome == Outcome::Unknown)
      throw AggregateError(AggregateError::Kind::UnknownOutcomePresent,
                           "record " + std::to_string(i) +
                               " has unknown outcome; simulate it first",
                           i);
    s.total_accesses += 1;
    if (r.outcome == Outcome::Hit) {
      s.total_hits += 1;
      s.hit_bytes += r.size_bytes;
    } else {
      s.total_misses += 1;
      s.miss_bytes += r.size_bytes;
    }
  }
  s.file_hit_rate =
      static_cast<double>(s.total_hits) / static_cast<double>(s.total_accesses);
  s.byte_hit_rate = static_cast<double>(s.hit_bytes) /
                    static_cast<double>(s.hit_bytes + s.miss_bytes);
  return s;
}

// Trailing (causal) moving average; the warm-up prefix averages over the
// shorter window that is actually available.
inline std::vector<double> moving_average(std::span<const double> series,
                                          std::size_t window) {
  if (window == 0)
    throw AggregateError(AggregateError::Kind::ZeroWindow,
                         "moving average window must be >= 1");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t lo = (i + 1 >= window) ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = lo; j <= i; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(i - lo + 1);
  }
  return out;
}

inline double rmse(std::span<const double> predicted,
                   std::span<const double> actual) {
  if (predicted.size() != actual.size())
    throw AggregateError(AggregateError::Kind::LengthMismatch,
                         "rmse requires equal lengths");
  if (predicted.empty())
    throw AggregateError(AggregateError::Kind::EmptySequences,
                         "rmse requires non-empty sequences");
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - actual[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predicted.size()));
}

// Population standard deviation (divisor N).
inline double std_dev(std::span<const double> series) {
  if (series.size() < 2)
    throw AggregateError(AggregateError::Kind::TooFewPoints,
                         "std_dev requires at least 2 points");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(series.size());
  double ss = 0.0;
  for (double v : series) {
    const double d = v - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(series.size()));
}

inline constexpr std::string_view kBinsCsvHeader =
    "bin_start,granularity,miss_count,miss_bytes,hit_count,hit_bytes,"
    "agg_miss_tput,agg_hit_tput,avg_miss_tput,avg_hit_tput";

inline void write_bins_csv(std::span<const BinFeatures> bins,
                           std::ostream& out) {
  out << kBinsCsvHeader << '\n';
  for (const auto& b : bins) {
    out << format_rfc3339(b.bin_start) << ',' << granularity_name(b.granularity)
        << ',' << b.miss_count << ',' << b.miss_bytes << ',' << b.hit_count
        << ',' << b.hit_bytes << ',' << detail::format_double(b.agg_miss_throughput)
        << ',' << detail::format_double(b.agg_hit_throughput) << ','
        << detail::format_double(b.avg_miss_throughput) << ','
        << detail::format_double(b.avg_hit_throughput) << '\n';
  }
}

inline std::vector<BinFeatures> read_bins_csv(std::istream& in) {
  CsvReader reader(in);
  std::vector<std::string> fields;
  std::vector<BinFeatures> bins;
  bool saw_header = false;
  while (reader.next_record(fields)) {
    if (!saw_header) {
      saw_header = true;
      std::string joined;
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) joined += ',';
        joined += fields[i];
      }
      if (joined != kBinsCsvHeader)
        throw std::runtime_error("bins csv: unexpected header '" + joined + "'");
      continue;
    }
    if (fields.size() != 10)
      throw std::runtime_error("bins csv line " + std::to_string(reader.line()) +
                               ": expected 10 fields");
    BinFeatures b;
    auto ts = parse_rfc3339(fields[0]);
    auto g = granularity_from_name(fields[1]);
    if (!ts || !g)
      throw std::runtime_error("bins csv line " + std::to_string(reader.line()) +
                               ": bad bin_start or granularity");
    b.bin_start = *ts;
    b.granularity = *g;
    auto u64_at = [&](int i) {
      auto v = detail::parse_u64(fields[i]);
      if (!v)
        throw std::runtime_error("bins csv line " +
                                 std::to_string(reader.line()) +
                                 ": bad integer field " + std::to_string(i));
      return *v;
    };
    auto f64_at = [&](int i) {
      auto v = detail::parse_double(fields[i]);
      if (!v)
        throw std::runtime_error("bins csv line " +
                                 std::to_string(reader.line()) +
                                 ": bad float field " + std::to_string(i));
      return *v;
    };
    b.miss_count = u64_at(2);
    b.miss_bytes = u64_at(3);
    b.hit_count = u64_at(4);
    b.hit_bytes = u64_at(5);
    b.agg_miss_throughput = f64_at(6);
    b.agg_hit_throughput = f64_at(7);
    b.avg_miss_throughput = f64_at(8);
    b.avg_hit_throughput = f64_at(9);
    bins.push_back(b);
  }
  return bins;
}

}  // namespace cachecast
