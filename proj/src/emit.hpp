#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace csim {

struct CurveRow {
  std::string scheme;
  int generation = 0;
  std::string metric;
  double value = 0.0;
  double stderr_ = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
  std::vector<CurveRow> curves;
  nlohmann::json manifest;  // full resolved configuration + artifact version
  std::string summary;      // headline numbers
};

// Writes curves.csv, manifest.json and summary.txt into out_dir. Refuses an
// empty curve set with ConfigError before touching the filesystem; each file
// is written to a temporary name and renamed, so partial outputs never
// appear under the final names.
void write_run_outputs(const RunResult& result, const std::string& out_dir);

// Shortest round-trip decimal representation; keeps outputs byte-identical
// across runs for identical doubles.
std::string format_double(double v);

}  // namespace csim
