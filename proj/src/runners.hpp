#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "emit.hpp"

namespace csim {

inline constexpr const char* kVersion = "0.1.0";

// Flat key-value run configuration. Values are JSON scalars (or small
// arrays, e.g. theta0). Files use one `key = value` pair per line with
// full-line # comments; command-line flags override file values.
struct RunConfig {
  std::string command;
  std::map<std::string, nlohmann::json> values;

  void set(const std::string& key, nlohmann::json value);
  // Parses the text as a JSON scalar, a comma-separated numeric list, or
  // falls back to a plain string.
  void set_text(const std::string& key, const std::string& text);
  void load_file(const std::string& path);
};

// Dispatches one of: simulate-workflow, simulate-limit, compare-workflows,
// classify-csv, verify-contiguity. The returned manifest echoes the fully
// resolved configuration (defaults made explicit) plus the artifact version,
// sufficient to reproduce the run bit-identically.
RunResult run_command(const RunConfig& cfg);

}  // namespace csim
