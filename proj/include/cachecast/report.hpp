#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cachecast/aggregate.hpp"
#include "cachecast/forecast/trainer.hpp"
#include "cachecast/simulate.hpp"
#include "cachecast/time.hpp"

namespace cachecast {

namespace svg {

inline std::string escape_xml(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Series {
  std::string label;
  std::string color;
  std::vector<double> ys;
};

struct ChartSpec {
  std::string title;
  std::string y_label;
  std::vector<TimeMs> xs;
  std::vector<Series> series;
  // Stacked charts render cumulative filled bands instead of lines.
  bool stacked = false;
};

inline std::string format_tick(double v) {
  char buf[48];
  double a = std::fabs(v);
  const char* suffix = "";
  double scaled = v;
  if (a >= 1e12) { scaled = v / 1e12; suffix = "T"; }
  else if (a >= 1e9) { scaled = v / 1e9; suffix = "G"; }
  else if (a >= 1e6) { scaled = v / 1e6; suffix = "M"; }
  else if (a >= 1e3) { scaled = v / 1e3; suffix = "k"; }
  std::snprintf(buf, sizeof buf, "%.3g%s", scaled, suffix);
  return buf;
}

// Self-contained SVG line/area chart. Deliberately small: time x-axis,
// linear y-axis from 0 (or the data minimum when negative), five y ticks,
// date labels at the ends, legend swatches at the top right.
inline std::string render_chart(const ChartSpec& spec) {
  constexpr double kW = 960, kH = 420;
  constexpr double kLeft = 86, kRight = 24, kTop = 48, kBottom = 46;
  const double plot_w = kW - kLeft - kRight;
  const double plot_h = kH - kTop - kBottom;

  double y_max = 0.0, y_min = 0.0;
  if (spec.stacked) {
    for (std::size_t i = 0; i < spec.xs.size(); ++i) {
      double total = 0.0;
      for (const auto& s : spec.series) total += s.ys[i];
      y_max = std::max(y_max, total);
    }
  } else {
    for (const auto& s : spec.series)
      for (double v : s.ys) {
        y_max = std::max(y_max, v);
        y_min = std::min(y_min, v);
      }
  }
  if (y_max == y_min) y_max = y_min + 1.0;

  const TimeMs x0 = spec.xs.empty() ? 0 : spec.xs.front();
  const TimeMs x1 = spec.xs.empty() ? 1 : spec.xs.back();
  const double x_span = x1 > x0 ? static_cast<double>(x1 - x0) : 1.0;
  auto px = [&](TimeMs x) {
    return kLeft + plot_w * static_cast<double>(x - x0) / x_span;
  };
  auto py = [&](double y) {
    return kTop + plot_h * (1.0 - (y - y_min) / (y_max - y_min));
  };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"420\" "
         "viewBox=\"0 0 960 420\">\n";
  out += "<rect width=\"960\" height=\"420\" fill=\"white\"/>\n";
  out += "<text x=\"480\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" + escape_xml(spec.title) + "</text>\n";

  char buf[512];
  for (int tick = 0; tick <= 5; ++tick) {
    const double v = y_min + (y_max - y_min) * tick / 5.0;
    const double y = py(v);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                  "stroke=\"#dddddd\"/>\n",
                  kLeft, y, kW - kRight, y);
    out += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\" "
                  "font-family=\"sans-serif\" font-size=\"11\">%s</text>\n",
                  kLeft - 6, y + 4, format_tick(v).c_str());
    out += buf;
  }
  if (!spec.xs.empty()) {
    for (int tick = 0; tick <= 4; ++tick) {
      const TimeMs x =
          x0 + static_cast<TimeMs>(x_span * tick / 4.0);
      std::snprintf(buf, sizeof buf,
                    "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" "
                    "font-family=\"sans-serif\" font-size=\"11\">%.10s</text>\n",
                    px(x), kH - kBottom + 18, format_rfc3339(x).c_str());
      out += buf;
    }
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"20\" y=\"%.1f\" font-family=\"sans-serif\" "
                "font-size=\"12\" transform=\"rotate(-90 20 %.1f)\" "
                "text-anchor=\"middle\">%s</text>\n",
                kTop + plot_h / 2, kTop + plot_h / 2,
                escape_xml(spec.y_label).c_str());
  out += buf;

  if (spec.stacked) {
    std::vector<double> lower(spec.xs.size(), 0.0);
    for (const auto& s : spec.series) {
      std::string points;
      for (std::size_t i = 0; i < spec.xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(spec.xs[i]),
                      py(lower[i] + s.ys[i]));
        points += buf;
      }
      for (std::size_t i = spec.xs.size(); i-- > 0;) {
        std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(spec.xs[i]),
                      py(lower[i]));
        points += buf;
      }
      out += "<polygon points=\"" + points + "\" fill=\"" + s.color +
             "\" fill-opacity=\"0.75\" stroke=\"none\"/>\n";
      for (std::size_t i = 0; i < spec.xs.size(); ++i) lower[i] += s.ys[i];
    }
  } else {
    for (const auto& s : spec.series) {
      std::string points;
      for (std::size_t i = 0; i < spec.xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(spec.xs[i]),
                      py(s.ys[i]));
        points += buf;
      }
      out += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" +
             s.color + "\" stroke-width=\"1.5\"/>\n";
    }
  }

  double legend_x = kW - kRight - 190;
  double legend_y = kTop - 14;
  for (const auto& s : spec.series) {
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"12\" height=\"12\" "
                  "fill=\"%s\"/>\n",
                  legend_x, legend_y - 10, s.color.c_str());
    out += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" "
                  "font-size=\"12\">%s</text>\n",
                  legend_x + 16, legend_y, escape_xml(s.label).c_str());
    out += buf;
    legend_y += 16;
  }

  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                "fill=\"none\" stroke=\"#333333\"/>\n",
                kLeft, kTop, plot_w, plot_h);
  out += buf;
  out += "</svg>\n";
  return out;
}

}  // namespace svg

// Hit/miss request fractions per bin, stacked to 1.0.
inline std::string render_rate_chart(std::span<const BinFeatures> bins) {
  svg::ChartSpec spec;
  spec.title = "Cache hit vs miss request fractions";
  spec.y_label = "fraction of requests";
  svg::Series hit{"hit fraction", "#2a9d8f", {}};
  svg::Series miss{"miss fraction", "#e76f51", {}};
  for (const auto& b : bins) {
    const double total = static_cast<double>(b.hit_count + b.miss_count);
    const double h = total > 0 ? static_cast<double>(b.hit_count) / total : 0.0;
    spec.xs.push_back(b.bin_start);
    hit.ys.push_back(h);
    miss.ys.push_back(total > 0 ? 1.0 - h : 0.0);
  }
  spec.series = {hit, miss};
  spec.stacked = true;
  return svg::render_chart(spec);
}

inline void write_rate_csv(std::span<const BinFeatures> bins,
                           std::ostream& out) {
  out << "bin_start,hit_fraction,miss_fraction\n";
  for (const auto& b : bins) {
    const double total = static_cast<double>(b.hit_count + b.miss_count);
    const double h = total > 0 ? static_cast<double>(b.hit_count) / total : 0.0;
    out << format_rfc3339(b.bin_start) << ','
        << detail::format_double(h) << ','
        << detail::format_double(total > 0 ? 1.0 - h : 0.0) << '\n';
  }
}

// Hit/miss byte volumes per bin, stacked.
inline std::string render_volume_chart(std::span<const BinFeatures> bins) {
  svg::ChartSpec spec;
  spec.title = "Cache traffic volume";
  spec.y_label = "bytes per bin";
  svg::Series hit{"hit bytes", "#2a9d8f", {}};
  svg::Series miss{"miss bytes", "#e76f51", {}};
  for (const auto& b : bins) {
    spec.xs.push_back(b.bin_start);
    hit.ys.push_back(static_cast<double>(b.hit_bytes));
    miss.ys.push_back(static_cast<double>(b.miss_bytes));
  }
  spec.series = {hit, miss};
  spec.stacked = true;
  return svg::render_chart(spec);
}

inline void write_volume_csv(std::span<const BinFeatures> bins,
                             std::ostream& out) {
  out << "bin_start,hit_bytes,miss_bytes\n";
  for (const auto& b : bins)
    out << format_rfc3339(b.bin_start) << ',' << b.hit_bytes << ','
        << b.miss_bytes << '\n';
}

// Predicted vs actual over the test split: exactly two series.
inline std::string render_overlay_chart(const std::string& label,
                                        std::span<const TimeMs> xs,
                                        std::span<const double> actual,
                                        std::span<const double> predicted) {
  svg::ChartSpec spec;
  spec.title = "Predicted vs actual: " + label;
  spec.y_label = label;
  spec.xs.assign(xs.begin(), xs.end());
  spec.series = {
      svg::Series{"actual", "#264653", {actual.begin(), actual.end()}},
      svg::Series{"predicted", "#e9c46a", {predicted.begin(), predicted.end()}}};
  return svg::render_chart(spec);
}

inline std::string render_overlay_chart(const ForecastRun& run) {
  std::string label = target_name(run.config.target);
  if (run.smoothing_window > 1)
    label += " (smoothed " + std::to_string(run.smoothing_window) + ")";
  return render_overlay_chart(label, run.test_bin_starts, run.test_actual,
                              run.test_predicted);
}

inline void write_overlay_csv(const ForecastRun& run, std::ostream& out) {
  out << "bin_start,actual,predicted\n";
  for (std::size_t i = 0; i < run.test_bin_starts.size(); ++i)
    out << format_rfc3339(run.test_bin_starts[i]) << ','
        << detail::format_double(run.test_actual[i]) << ','
        << detail::format_double(run.test_predicted[i]) << '\n';
}

inline void write_summary_markdown(const SummaryStats& stats,
                                   std::span<const EvalRow> eval_rows,
                                   std::ostream& out) {
  out << "# Run summary\n\n";
  out << "| metric | value |\n|---|---|\n";
  out << "| total accesses | " << stats.total_accesses << " |\n";
  out << "| hits | " << stats.total_hits << " |\n";
  out << "| misses | " << stats.total_misses << " |\n";
  out << "| hit bytes | " << stats.hit_bytes << " |\n";
  out << "| miss bytes | " << stats.miss_bytes << " |\n";
  out << "| file hit rate | " << detail::format_double(stats.file_hit_rate)
      << " |\n";
  out << "| byte hit rate | " << detail::format_double(stats.byte_hit_rate)
      << " |\n";
  if (!eval_rows.empty()) {
    out << "\n## Forecasts\n\n";
    out << "| target | smoothing | test RMSE | series sigma | relative |\n";
    out << "|---|---|---|---|---|\n";
    for (const auto& r : eval_rows)
      out << "| " << r.target << " | " << r.smoothing_window << " | "
          << detail::format_double(r.test_rmse) << " | "
          << detail::format_double(r.series_std) << " | "
          << detail::format_double(r.relative_rmse) << " |\n";
  }
}

// Request-count and byte totals recomputed from a bin series, for summaries
// when no simulation report is on hand.
inline SummaryStats stats_from_bins(std::span<const BinFeatures> bins) {
  SummaryStats s;
  for (const auto& b : bins) {
    s.total_hits += b.hit_count;
    s.total_misses += b.miss_count;
    s.hit_bytes += b.hit_bytes;
    s.miss_bytes += b.miss_bytes;
  }
  s.total_accesses = s.total_hits + s.total_misses;
  if (s.total_accesses)
    s.file_hit_rate = static_cast<double>(s.total_hits) /
                      static_cast<double>(s.total_accesses);
  if (s.hit_bytes + s.miss_bytes)
    s.byte_hit_rate = static_cast<double>(s.hit_bytes) /
                      static_cast<double>(s.hit_bytes + s.miss_bytes);
  return s;
}

}  // namespace cachecast
