#include <catch_amalgamated.hpp>

#include <map>

#include "cachecast/cachecast.hpp"
#include "testutil.hpp"

using namespace cachecast;
using rendezvous::Candidate;

namespace {

std::vector<Candidate> uniform_candidates(int n) {
  std::vector<Candidate> out;
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "node-%02d", i);
    out.push_back({buf, 1.0});
  }
  return out;
}

}  // namespace

TEST_CASE("rendezvous selection is deterministic and positive-scored") {
  auto nodes = uniform_candidates(8);
  for (int i = 0; i < 100; ++i) {
    std::string key = "file-" + std::to_string(i);
    auto a = rendezvous::select(key, nodes);
    auto b = rendezvous::select(key, nodes);
    CHECK(a == b);
    double s = rendezvous::score(key, nodes[a].node_id, 2.5);
    CHECK(s > 0.0);
    CHECK(std::isfinite(s));
  }
}

TEST_CASE("rendezvous weight proportionality") {
  const int kKeys = 20000;

  SECTION("3:1 split between two nodes") {
    std::vector<Candidate> nodes{{"alpha", 3.0}, {"beta", 1.0}};
    int alpha = 0;
    for (int i = 0; i < kKeys; ++i)
      if (rendezvous::select("k" + std::to_string(i), nodes) == 0) ++alpha;
    CHECK(std::abs(double(alpha) / kKeys - 0.75) < 0.02);
  }

  SECTION("ten equal nodes split evenly") {
    auto nodes = uniform_candidates(10);
    std::vector<int> counts(nodes.size(), 0);
    for (int i = 0; i < kKeys; ++i)
      counts[rendezvous::select("k" + std::to_string(i), nodes)]++;
    for (int c : counts) CHECK(std::abs(double(c) / kKeys - 0.10) < 0.02);
  }
}

TEST_CASE("only keys owned by a removed node move") {
  auto nodes = uniform_candidates(24);
  const std::string removed = nodes[11].node_id;

  std::map<std::string, std::string> owner;
  for (int i = 0; i < 5000; ++i) {
    std::string key = "k" + std::to_string(i);
    owner[key] = nodes[rendezvous::select(key, nodes)].node_id;
  }

  auto shrunk = nodes;
  shrunk.erase(shrunk.begin() + 11);
  int moved = 0;
  for (const auto& [key, before] : owner) {
    const std::string& after = shrunk[rendezvous::select(key, shrunk)].node_id;
    if (before == removed) {
      ++moved;
      CHECK(after != removed);
    } else {
      CHECK(after == before);
    }
  }
  // The removed node owned roughly 1/24 of the keyspace.
  CHECK(moved > 5000 / 24 / 2);
  CHECK(moved < 5000 / 24 * 2);
}

TEST_CASE("rendezvous rejects degenerate input") {
  CHECK_THROWS_AS(rendezvous::score("k", "n", 0.0), std::invalid_argument);
  CHECK_THROWS_AS(rendezvous::score("k", "n", -1.0), std::invalid_argument);
  CHECK_THROWS_AS(rendezvous::select("k", std::span<const Candidate>{}),
                  std::invalid_argument);
}

TEST_CASE("murmur64a basic properties") {
  CHECK(murmur64a("abc", 0) == murmur64a("abc", 0));
  CHECK(murmur64a("abc", 0) != murmur64a("abd", 0));
  CHECK(murmur64a("abc", 0) != murmur64a("abc", 1));
  CHECK(murmur64a("", 0) != murmur64a("", 1));
}
