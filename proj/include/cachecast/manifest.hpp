#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cachecast/config.hpp"
#include "cachecast/sha256.hpp"
#include "cachecast/version.hpp"

namespace cachecast {

struct ManifestFile {
  std::string path;
  std::string sha256;

  bool operator==(const ManifestFile&) const = default;
};

// Record of one CLI invocation: everything needed to verify an exact re-run
// (inputs and outputs by content hash; timings are informational only).
struct RunManifest {
  std::string tool_version = kVersion;
  std::string command_line;
  std::uint64_t seed = 0;
  std::vector<ManifestFile> configs;
  std::vector<ManifestFile> outputs;
  double wall_seconds = 0.0;
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
  auto files = [](const std::vector<ManifestFile>& fs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : fs)
      arr.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return arr;
  };
  return nlohmann::json{{"tool_version", m.tool_version},
                        {"command_line", m.command_line},
                        {"seed", m.seed},
                        {"configs", files(m.configs)},
                        {"outputs", files(m.outputs)},
                        {"wall_seconds", m.wall_seconds}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  constexpr const char* ctx = "manifest";
  RunManifest m;
  m.tool_version = detail::json_string(j, "tool_version", ctx);
  m.command_line = detail::json_string(j, "command_line", ctx);
  m.seed = detail::json_u64(j, "seed", ctx);
  auto files = [&](const char* key) {
    std::vector<ManifestFile> out;
    const auto& arr = detail::json_require(j, key, ctx);
    if (!arr.is_array())
      throw ConfigError(std::string(ctx) + ": '" + key + "' must be an array");
    for (const auto& f : arr)
      out.push_back({detail::json_string(f, "path", ctx),
                     detail::json_string(f, "sha256", ctx)});
    return out;
  };
  m.configs = files("configs");
  m.outputs = files("outputs");
  m.wall_seconds = detail::json_double(j, "wall_seconds", ctx);
  return m;
}

}  // namespace cachecast
