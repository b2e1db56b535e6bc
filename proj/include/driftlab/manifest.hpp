#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace driftlab {

struct ManifestFile {
  std::string name;  // path relative to the output directory
  std::uint64_t checksum = 0;
  std::size_t bytes = 0;
};

// Written as manifest.json next to every run's outputs so a result can be traced
// back to the exact inputs that produced it.
struct RunManifest {
  std::string command;
  std::string version;
  std::uint64_t seed = 0;
  std::string config_text;  // the config file verbatim
  std::vector<ManifestFile> files;
  double wall_seconds = 0.0;
};

// Stable field order, 2-space indent; checksums rendered as fnv1a64 hex.
std::string manifest_json(const RunManifest& m);

}  // namespace driftlab
