#include "emit.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "errors.hpp"

namespace csim {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_atomic(const std::filesystem::path& dir, const std::string& name,
                  const std::string& content) {
  const std::filesystem::path tmp = dir / (".tmp-" + name);
  const std::filesystem::path dst = dir / name;
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, dst, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace

void write_run_outputs(const RunResult& result, const std::string& out_dir) {
  if (result.curves.empty()) {
    throw ConfigError("write_run_outputs: refusing to write an empty result");
  }
  const std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::string csv = "scheme,generation,metric,value,stderr\n";
  for (const auto& row : result.curves) {
    csv += row.scheme;
    csv += ',';
    csv += std::to_string(row.generation);
    csv += ',';
    csv += row.metric;
    csv += ',';
    csv += format_double(row.value);
    csv += ',';
    csv += std::isnan(row.stderr_) ? "" : format_double(row.stderr_);
    csv += '\n';
  }
  write_atomic(dir, "curves.csv", csv);
  write_atomic(dir, "manifest.json", result.manifest.dump(2) + "\n");
  write_atomic(dir, "summary.txt", result.summary);
}

}  // namespace csim
