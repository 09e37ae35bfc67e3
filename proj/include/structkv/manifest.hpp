#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "structkv/common.hpp"

namespace structkv {

// Provenance record for one CLI invocation. Every output file embeds
// manifest_hash() so results can be traced back to the exact command.
struct RunManifest {
  std::string command;
  std::uint64_t config_hash = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> policies;
  std::vector<std::string> output_paths;
  std::string engine_version = kEngineVersion;

  // Hash of the canonical rendering of all fields above.
  std::uint64_t manifest_hash() const;

  std::string to_json() const;
  void save(const std::string& path) const;
};

}  // namespace structkv
