#include "structkv/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace structkv {

namespace {

std::string canonical(const RunManifest& m) {
  std::ostringstream os;
  os << "command=" << m.command << "\n";
  os << "config_hash=" << m.config_hash << "\n";
  os << "engine_version=" << m.engine_version << "\n";
  os << "policies=";
  for (const auto& p : m.policies) os << p << ",";
  os << "\nseeds=";
  for (auto s : m.seeds) os << s << ",";
  os << "\noutputs=";
  for (const auto& p : m.output_paths) os << p << ",";
  os << "\n";
  return os.str();
}

}  // namespace

std::uint64_t RunManifest::manifest_hash() const {
  return fnv1a64(canonical(*this));
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["engine_version"] = engine_version;
  j["manifest_hash"] = manifest_hash();
  j["output_paths"] = output_paths;
  j["policies"] = policies;
  j["seeds"] = seeds;
  return j.dump(2) + "\n";
}

void RunManifest::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw UsageError("cannot write manifest: " + path);
  out << to_json();
}

}  // namespace structkv
