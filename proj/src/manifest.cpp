#include "driftlab/manifest.hpp"

#include <json.hpp>

namespace driftlab {

namespace {
std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}
}  // namespace

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["config"] = m.config_text;
  j["files"] = nlohmann::ordered_json::array();
  for (const auto& f : m.files) {
    nlohmann::ordered_json jf;
    jf["name"] = f.name;
    jf["fnv1a64"] = hex64(f.checksum);
    jf["bytes"] = f.bytes;
    j["files"].push_back(jf);
  }
  j["wall_seconds"] = m.wall_seconds;
  return j.dump(2) + "\n";
}

}  // namespace driftlab
