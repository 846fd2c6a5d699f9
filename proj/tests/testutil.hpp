#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <list>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cachecast/cachecast.hpp"

namespace testutil {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path() / "cachecast-test-XXXXXX";
    std::string tmpl = base.string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, std::string_view content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline cachecast::AccessRecord make_request(cachecast::TimeMs ts,
                                            std::string file_id,
                                            std::string file_class,
                                            std::uint64_t size) {
  cachecast::AccessRecord r;
  r.ts = ts;
  r.file_id = std::move(file_id);
  r.file_class = std::move(file_class);
  r.size_bytes = size;
  return r;
}

// Random valid record in either resolved or request form. Exercises quoting
// and escaping by salting identifiers with awkward characters.
inline cachecast::AccessRecord random_record(cachecast::Rng& rng,
                                             cachecast::TimeMs ts,
                                             bool resolved) {
  static const char* kSpice[] = {"",      ",",  "\"q\"", " sp ",
                                 "\thdr", "\n", "a,b\"c"};
  cachecast::AccessRecord r;
  r.ts = ts;
  r.file_id = "f" + std::to_string(rng.below(1'000'000)) +
              kSpice[rng.below(std::size(kSpice))];
  r.file_class = rng.bernoulli(0.5) ? "S" : "L";
  r.size_bytes = 1 + rng.below(1'000'000'000'000ull);
  if (resolved) {
    r.outcome = rng.bernoulli(0.5) ? cachecast::Outcome::Hit
                                   : cachecast::Outcome::Miss;
    r.transfer_seconds = rng.lognormal(0.0, 2.0);
    r.node_id = "node-" + std::to_string(rng.below(24));
  }
  return r;
}

inline cachecast::Trace random_trace(std::size_t n, std::uint64_t seed,
                                     bool resolved) {
  cachecast::Rng rng(seed);
  cachecast::Trace t;
  cachecast::TimeMs ts = cachecast::make_utc(2021, 7, 1);
  for (std::size_t i = 0; i < n; ++i) {
    ts += static_cast<cachecast::TimeMs>(rng.below(5000));
    t.records.push_back(random_record(rng, ts, resolved));
  }
  return t;
}

// Brute-force LRU with the same watermark rule as CacheNode: admission that
// would push usage past floor(high * capacity) evicts from the tail until
// usage fits under floor(low * capacity). Linear scans everywhere.
class ReferenceLru {
 public:
  ReferenceLru(std::uint64_t capacity, double high, double low)
      : high_limit_(static_cast<std::uint64_t>(
            std::floor(high * static_cast<double>(capacity)))),
        low_limit_(static_cast<std::uint64_t>(
            std::floor(low * static_cast<double>(capacity)))) {}

  // Returns true on hit. Misses admit when the size fits the low limit.
  bool access(const std::string& file_id, std::uint64_t size) {
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
      if (it->first == file_id) {
        auto entry = *it;
        entries_.erase(it);
        entries_.insert(entries_.begin(), entry);
        return true;
      }
    }
    if (size < 1 || size > low_limit_) return false;
    if (used_ + size > high_limit_) {
      while (used_ + size > low_limit_) {
        used_ -= entries_.back().second;
        entries_.pop_back();
      }
    }
    entries_.insert(entries_.begin(), {file_id, size});
    used_ += size;
    return false;
  }

  std::uint64_t used() const { return used_; }

 private:
  std::uint64_t high_limit_, low_limit_;
  std::uint64_t used_ = 0;
  std::vector<std::pair<std::string, std::uint64_t>> entries_;
};

}  // namespace testutil
