#include "collapsesim.h"

#include <new>
#include <string>

#include "emit.hpp"
#include "errors.hpp"
#include "runners.hpp"

using csim::RunConfig;
using csim::RunResult;

struct cs_config {
  RunConfig config;
};

struct cs_result {
  RunResult result;
};

namespace {

thread_local std::string g_last_error = "";

cs_status fail(cs_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
cs_status guarded(Fn&& fn) {
  try {
    fn();
    return CS_OK;
  } catch (const csim::ConfigError& e) {
    return fail(CS_ERROR_CONFIG, e.what());
  } catch (const csim::DataError& e) {
    return fail(CS_ERROR_DATA, e.what());
  } catch (const csim::NumericError& e) {
    return fail(CS_ERROR_NUMERIC, e.what());
  } catch (const std::exception& e) {
    return fail(CS_ERROR, e.what());
  } catch (...) {
    return fail(CS_ERROR, "unknown error");
  }
}

}  // namespace

extern "C" {

const char* cs_version(void) { return csim::kVersion; }

const char* cs_last_error(void) { return g_last_error.c_str(); }

cs_config* cs_config_new(const char* command) {
  if (!command) return nullptr;
  auto* cfg = new (std::nothrow) cs_config;
  if (cfg) cfg->config.command = command;
  return cfg;
}

void cs_config_free(cs_config* cfg) { delete cfg; }

cs_status cs_config_set(cs_config* cfg, const char* key, const char* value) {
  if (!cfg || !key || !value) return fail(CS_ERROR_CONFIG, "null argument");
  return guarded([&] { cfg->config.set_text(key, value); });
}

cs_status cs_config_load_file(cs_config* cfg, const char* path) {
  if (!cfg || !path) return fail(CS_ERROR_CONFIG, "null argument");
  return guarded([&] { cfg->config.load_file(path); });
}

cs_status cs_run(const cs_config* cfg, cs_result** out_result) {
  if (!cfg || !out_result) return fail(CS_ERROR_CONFIG, "null argument");
  *out_result = nullptr;
  return guarded([&] {
    RunResult result = csim::run_command(cfg->config);
    auto* wrapped = new cs_result;
    wrapped->result = std::move(result);
    *out_result = wrapped;
  });
}

void cs_result_free(cs_result* result) { delete result; }

size_t cs_result_curve_count(const cs_result* result) {
  return result ? result->result.curves.size() : 0;
}

cs_status cs_result_curve_row(const cs_result* result, size_t index,
                              const char** scheme, int* generation,
                              const char** metric, double* value,
                              double* stderr_value) {
  if (!result) return fail(CS_ERROR_CONFIG, "null result");
  if (index >= result->result.curves.size()) {
    return fail(CS_ERROR_CONFIG, "curve row index out of range");
  }
  const auto& row = result->result.curves[index];
  if (scheme) *scheme = row.scheme.c_str();
  if (generation) *generation = row.generation;
  if (metric) *metric = row.metric.c_str();
  if (value) *value = row.value;
  if (stderr_value) *stderr_value = row.stderr_;
  return CS_OK;
}

const char* cs_result_manifest_json(const cs_result* result) {
  if (!result) return "";
  thread_local std::string manifest;
  manifest = result->result.manifest.dump(2);
  return manifest.c_str();
}

const char* cs_result_summary_text(const cs_result* result) {
  return result ? result->result.summary.c_str() : "";
}

cs_status cs_result_write(const cs_result* result, const char* out_dir) {
  if (!result || !out_dir) return fail(CS_ERROR_CONFIG, "null argument");
  return guarded([&] { csim::write_run_outputs(result->result, out_dir); });
}

}  // extern "C"
