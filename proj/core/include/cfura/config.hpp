#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cfura/scenario.hpp"

namespace cfura {

/// Value of the TOML subset used by scenario files: scalars and flat arrays.
struct TomlValue {
  enum class Kind { boolean, integer, floating, string, array };
  Kind kind = Kind::integer;
  bool boolean = false;
  std::int64_t integer = 0;
  double floating = 0.0;
  std::string string;
  std::vector<TomlValue> array;

  double as_number() const;
};

/// Keys of [section] tables are stored dotted ("network.side_km").
using TomlTable = std::map<std::string, TomlValue>;

/// Parses comments, [tables], key = value with bool/int/float/"string"/[arrays].
/// Throws ConfigError with the line number on malformed input.
TomlTable parse_toml(std::string_view text);

/// Overlays the table onto `cfg`; unknown keys are rejected.
void apply_config(ScenarioConfig& cfg, const TomlTable& table);

ScenarioConfig load_config_file(const std::filesystem::path& path, ScenarioConfig base);

/// Canonical TOML rendering of a config (round-trips through parse_toml/apply_config).
std::string to_toml(const ScenarioConfig& cfg);

}  // namespace cfura
