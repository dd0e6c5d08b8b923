#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace wamc {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a 64-bit over the canonical (sorted-key) JSON dump.
inline std::uint64_t config_hash(const nlohmann::json& config) {
  const std::string s = config.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct RunManifest {
  std::string scenario;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<std::string> outputs;
  double wall_clock_seconds = 0.0;

  nlohmann::json toJson() const {
    nlohmann::json j;
    j["tool_version"] = kToolVersion;
    j["scenario"] = scenario;
    j["seed"] = seed;
    j["config"] = config;  // full effective config so the run can be replayed
    j["config_hash"] = config_hash(config);
    j["outputs"] = outputs;
    j["wall_clock_seconds"] = wall_clock_seconds;
    return j;
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    out << toJson().dump(2) << "\n";
  }
};

class WallClock {
 public:
  WallClock() : start_(std::chrono::steady_clock::now()) {}
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace wamc
