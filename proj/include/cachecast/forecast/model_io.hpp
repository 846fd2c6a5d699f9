#pragma once

#include <array>
#include <charconv>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cachecast/forecast/trainer.hpp"

namespace cachecast {

namespace detail {

inline std::string format_float(float v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline float parse_float_token(const std::string& tok, const char* what) {
  float v = 0.0f;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ConfigError(std::string("model file: bad float in ") + what);
  return v;
}

inline double parse_double_token(const std::string& tok, const char* what) {
  auto v = parse_double(tok);
  if (!v) throw ConfigError(std::string("model file: bad value in ") + what);
  return *v;
}

}  // namespace detail

inline constexpr const char* kModelMagic = "cachecast-lstm";
inline constexpr int kModelVersion = 1;

// Versioned textual tensor format: line-oriented, whitespace-separated,
// values printed with shortest round-trip formatting so save/load is exact.
inline void save_model(const ForecastRun& run, std::ostream& out) {
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "precision float32\n";
  out << "target " << target_name(run.config.target) << '\n';
  out << "granularity " << granularity_name(run.granularity) << '\n';
  out << "smoothing_window " << run.smoothing_window << '\n';
  out << "hidden_units " << run.params.hidden << '\n';
  out << "window_length " << run.config.window_length << '\n';
  out << "feature_mins";
  for (double v : run.feature_mins) out << ' ' << detail::format_double(v);
  out << '\n';
  out << "feature_ranges";
  for (double v : run.feature_ranges) out << ' ' << detail::format_double(v);
  out << '\n';
  out << "target_min " << detail::format_double(run.target_min) << '\n';
  out << "target_range " << detail::format_double(run.target_range) << '\n';
  auto tensor = [&out](const char* name, const std::vector<float>& v) {
    out << name << ' ' << v.size();
    for (float x : v) out << ' ' << detail::format_float(x);
    out << '\n';
  };
  tensor("w_x", run.params.w_x);
  tensor("w_h", run.params.w_h);
  tensor("b", run.params.b);
  tensor("w_head", run.params.w_head);
  out << "b_head " << detail::format_float(run.params.b_head) << '\n';
}

struct LoadedModel {
  TargetFeature target = TargetFeature::AvgMissThroughput;
  Granularity granularity = Granularity::Hourly;
  std::size_t smoothing_window = 1;
  std::size_t window_length = 0;
  std::array<double, kNumFeatures> feature_mins{};
  std::array<double, kNumFeatures> feature_ranges{};
  double target_min = 0.0;
  double target_range = 0.0;
  LstmParams<float> params;
};

inline LoadedModel load_model(std::istream& in) {
  LoadedModel model;
  std::string line;

  auto next_tokens = [&](const char* expect_key) {
    if (!std::getline(in, line))
      throw ConfigError(std::string("model file: missing ") + expect_key);
    std::istringstream ss(line);
    std::vector<std::string> toks;
    std::string t;
    while (ss >> t) toks.push_back(std::move(t));
    if (toks.empty() || toks[0] != expect_key)
      throw ConfigError(std::string("model file: expected '") + expect_key +
                        "', got '" + line + "'");
    return toks;
  };

  auto header = next_tokens(kModelMagic);
  if (header.size() != 2 || header[1] != std::to_string(kModelVersion))
    throw ConfigError("model file: unsupported version");
  auto precision = next_tokens("precision");
  if (precision.size() != 2 || precision[1] != "float32")
    throw ConfigError("model file: unsupported precision");

  auto target = next_tokens("target");
  auto t = target.size() == 2 ? target_from_name(target[1]) : std::nullopt;
  if (!t) throw ConfigError("model file: unknown target");
  model.target = *t;
  auto gran = next_tokens("granularity");
  auto g = gran.size() == 2 ? granularity_from_name(gran[1]) : std::nullopt;
  if (!g) throw ConfigError("model file: unknown granularity");
  model.granularity = *g;

  auto scalar_u64 = [&](const char* key) {
    auto toks = next_tokens(key);
    if (toks.size() != 2) throw ConfigError(std::string("model file: bad ") + key);
    auto v = detail::parse_u64(toks[1]);
    if (!v) throw ConfigError(std::string("model file: bad ") + key);
    return *v;
  };
  model.smoothing_window = scalar_u64("smoothing_window");
  model.params.hidden = scalar_u64("hidden_units");
  model.window_length = scalar_u64("window_length");

  auto double_row = [&](const char* key, std::span<double> dst) {
    auto toks = next_tokens(key);
    if (toks.size() != dst.size() + 1)
      throw ConfigError(std::string("model file: bad ") + key);
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = detail::parse_double_token(toks[i + 1], key);
  };
  double_row("feature_mins", model.feature_mins);
  double_row("feature_ranges", model.feature_ranges);
  double tmin[1], trange[1];
  double_row("target_min", tmin);
  double_row("target_range", trange);
  model.target_min = tmin[0];
  model.target_range = trange[0];

  auto tensor = [&](const char* key, std::vector<float>& dst,
                    std::size_t expect) {
    auto toks = next_tokens(key);
    if (toks.size() < 2)
      throw ConfigError(std::string("model file: bad ") + key);
    auto count = detail::parse_u64(toks[1]);
    if (!count || *count != expect || toks.size() != *count + 2)
      throw ConfigError(std::string("model file: wrong length for ") + key);
    dst.resize(*count);
    for (std::size_t i = 0; i < *count; ++i)
      dst[i] = detail::parse_float_token(toks[i + 2], key);
  };
  const std::size_t h = model.params.hidden;
  tensor("w_x", model.params.w_x, kNumFeatures * 4 * h);
  tensor("w_h", model.params.w_h, h * 4 * h);
  tensor("b", model.params.b, 4 * h);
  tensor("w_head", model.params.w_head, h);
  auto bh = next_tokens("b_head");
  if (bh.size() != 2) throw ConfigError("model file: bad b_head");
  model.params.b_head = detail::parse_float_token(bh[1], "b_head");
  return model;
}

}  // namespace cachecast
