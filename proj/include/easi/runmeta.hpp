#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace easi {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a over file bytes; manifest content hashes are for reproducibility
// bookkeeping, not security.
std::string content_hash(const std::string& path);
std::string hash_bytes(const std::string& bytes);

struct RunManifest {
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, hash
  std::vector<std::pair<std::string, std::string>> outputs;  // path, hash
  std::string config_hash;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;

  void add_input(const std::string& path);
  void add_output(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace easi
