#include "easi/runmeta.hpp"

#include <fstream>
#include <sstream>

#include "easi/types.hpp"
#include "json.hpp"

namespace easi {

std::string hash_bytes(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

std::string content_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot hash " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return hash_bytes(ss.str());
}

void RunManifest::add_input(const std::string& path) {
  inputs.emplace_back(path, content_hash(path));
}

void RunManifest::add_output(const std::string& path) {
  outputs.emplace_back(path, content_hash(path));
}

void RunManifest::save(const std::string& path) const {
  nlohmann::json j;
  j["subcommand"] = subcommand;
  j["tool_version"] = kToolVersion;
  nlohmann::json in = nlohmann::json::object();
  for (const auto& [p, h] : inputs) in[p] = h;
  j["inputs"] = in;
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [p, h] : outputs) out[p] = h;
  j["outputs"] = out;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["wall_time_s"] = wall_time_s;
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << j.dump(2) << "\n";
}

}  // namespace easi
