#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cfura/scenario.hpp"

namespace cfura {

/// Hex SHA-1 of "blob <size>\0<content>" (git object id of the content).
std::string git_blob_sha1(std::string_view content);

/// Content hash identifying a run: experiment name plus canonical config.
std::string manifest_hash(const ScenarioConfig& cfg, std::string_view experiment);

struct RunManifest {
  std::string experiment;
  ScenarioConfig config;
  std::string hash;
  double wall_seconds = 0.0;
  bool deterministic = false;
  unsigned threads = 1;
  std::vector<std::string> artifacts;
};

RunManifest make_manifest(const ScenarioConfig& cfg, std::string_view experiment);

/// JSON with config, seed, substream ids, geometry (RUs, tiles, per-location grids and activities),
/// hash, wall clock and artifact list.
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest, const Scenario& scenario);

}  // namespace cfura
