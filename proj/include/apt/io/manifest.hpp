#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <string>
#include <vector>

#include <json.hpp>

#include "apt/core/rng.hpp"

namespace apt {

inline constexpr const char* kVersion = "0.1.0";

/// 64-bit FNV-1a over the compact dump of `j`. Object keys are kept sorted by
/// nlohmann::json, so key order and whitespace in the source do not matter.
inline std::string config_hash(const nlohmann::json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

struct RoundArtifacts {
  int round = 0;
  std::vector<std::string> paths;  // relative to the run directory
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string started, finished;
  std::string status = "running";
  std::vector<RoundArtifacts> rounds;
  std::vector<std::string> files;  // run-level artifacts
  std::string version = kVersion;

  nlohmann::json to_json() const {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& a : rounds) r.push_back({{"round", a.round}, {"paths", a.paths}});
    return {{"config_hash", config_hash}, {"seed", seed},   {"started", started}, {"finished", finished},
            {"status", status},           {"rounds", r},    {"files", files},     {"version", version}};
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    m.config_hash = j.at("config_hash");
    m.seed = j.at("seed");
    m.started = j.value("started", "");
    m.finished = j.value("finished", "");
    m.status = j.value("status", "");
    for (const auto& r : j.at("rounds")) m.rounds.push_back({r.at("round"), r.at("paths")});
    m.files = j.value("files", std::vector<std::string>{});
    m.version = j.value("version", "");
    return m;
  }
};

}  // namespace apt
