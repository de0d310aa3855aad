/*
 * collapsesim C API
 *
 * Shared-library interface to the iterative model-training simulator:
 * finite-sample training loops on accumulating real+synthetic data, their
 * limiting sequential Gaussian process, contiguity diagnostics and the CSV
 * classification harness.
 *
 * Usage: create a config for one of the commands (simulate-workflow,
 * simulate-limit, compare-workflows, classify-csv, verify-contiguity), set
 * string/number keys, run it, then read curve rows or write the output
 * bundle (curves.csv, manifest.json, summary.txt).
 *
 * All handles are opaque; every fallible call returns a cs_status and leaves
 * a human-readable message in cs_last_error() (thread-local).
 */
#ifndef COLLAPSESIM_H
#define COLLAPSESIM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cs_status {
  CS_OK = 0,
  CS_ERROR = 1,         /* unexpected failure */
  CS_ERROR_CONFIG = 2,  /* invalid configuration */
  CS_ERROR_DATA = 3,    /* unreadable or malformed input data */
  CS_ERROR_NUMERIC = 4  /* numeric failure during computation */
} cs_status;

typedef struct cs_config cs_config;
typedef struct cs_result cs_result;

const char* cs_version(void);

/* Message from the most recent failing call on this thread; never NULL. */
const char* cs_last_error(void);

/* command: simulate-workflow | simulate-limit | compare-workflows |
 * classify-csv | verify-contiguity. Returns NULL only on allocation
 * failure. */
cs_config* cs_config_new(const char* command);
void cs_config_free(cs_config* cfg);

/* Sets a configuration key. The value text is parsed as a JSON scalar or a
 * comma-separated numeric list, falling back to a plain string. */
cs_status cs_config_set(cs_config* cfg, const char* key, const char* value);

/* Loads `key = value` lines (# comments allowed). Keys already set on the
 * config win over file values. */
cs_status cs_config_load_file(cs_config* cfg, const char* path);

/* Runs the configured command. On CS_OK, *out_result owns the result and
 * must be released with cs_result_free. */
cs_status cs_run(const cs_config* cfg, cs_result** out_result);
void cs_result_free(cs_result* result);

size_t cs_result_curve_count(const cs_result* result);

/* Reads one curve row. String outputs point into the result and stay valid
 * until cs_result_free. stderr_value is NaN for metrics without a Monte
 * Carlo error. Any output pointer may be NULL to skip that field. */
cs_status cs_result_curve_row(const cs_result* result, size_t index,
                              const char** scheme, int* generation,
                              const char** metric, double* value,
                              double* stderr_value);

const char* cs_result_manifest_json(const cs_result* result);
const char* cs_result_summary_text(const cs_result* result);

/* Writes curves.csv, manifest.json and summary.txt into out_dir
 * (write-temp-then-rename; the directory is created if needed). */
cs_status cs_result_write(const cs_result* result, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* COLLAPSESIM_H */
