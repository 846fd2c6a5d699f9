#pragma once

namespace cachecast {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cachecast
