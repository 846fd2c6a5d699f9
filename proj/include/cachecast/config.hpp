#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace cachecast {

// Invalid or inconsistent configuration. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline const nlohmann::json& json_require(const nlohmann::json& obj,
                                          const char* key,
                                          const char* context) {
  if (!obj.is_object())
    throw ConfigError(std::string(context) + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw ConfigError(std::string(context) + ": missing field '" + key + "'");
  return *it;
}

inline double json_double(const nlohmann::json& obj, const char* key,
                          const char* context) {
  const auto& v = json_require(obj, key, context);
  if (!v.is_number())
    throw ConfigError(std::string(context) + ": field '" + key +
                      "' must be a number");
  return v.get<double>();
}

inline std::uint64_t json_u64(const nlohmann::json& obj, const char* key,
                              const char* context) {
  const auto& v = json_require(obj, key, context);
  if (!v.is_number_integer() ||
      (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ConfigError(std::string(context) + ": field '" + key +
                      "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::string json_string(const nlohmann::json& obj, const char* key,
                               const char* context) {
  const auto& v = json_require(obj, key, context);
  if (!v.is_string())
    throw ConfigError(std::string(context) + ": field '" + key +
                      "' must be a string");
  return v.get<std::string>();
}

inline nlohmann::json parse_config_text(const std::string& text,
                                        const char* context) {
  auto parsed = nlohmann::json::parse(text, nullptr, false);
  if (parsed.is_discarded())
    throw ConfigError(std::string(context) + ": malformed JSON");
  return parsed;
}

}  // namespace detail
}  // namespace cachecast
