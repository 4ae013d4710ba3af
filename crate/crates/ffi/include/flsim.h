#ifndef FLSIM_H
#define FLSIM_H

/* Generated by cbindgen from flsim-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible call.
 */
typedef enum FlsimStatus {
  /**
   * Success.
   */
  FLSIM_STATUS_OK = 0,
  /**
   * Malformed or inconsistent configuration.
   */
  FLSIM_STATUS_INVALID_CONFIG = 1,
  /**
   * Numerical failure inside the solvers.
   */
  FLSIM_STATUS_NUMERICAL = 2,
  /**
   * Filesystem failure.
   */
  FLSIM_STATUS_IO = 3,
  /**
   * A required pointer argument was null.
   */
  FLSIM_STATUS_NULL_POINTER = 4,
  /**
   * A string argument was not valid UTF-8.
   */
  FLSIM_STATUS_INVALID_UTF8 = 5,
  /**
   * An internal panic was caught at the boundary.
   */
  FLSIM_STATUS_PANIC = 6,
} FlsimStatus;

/**
 * Opaque experiment configuration handle.
 */
typedef struct FlsimConfig FlsimConfig;

/**
 * Opaque result of a conversion run.
 */
typedef struct FlsimConversionResult FlsimConversionResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static, borrowed C string.
 */
const char *flsim_version(void);

/**
 * Last error message of this thread, or null when no error was recorded.
 * The returned pointer stays valid until the next failing call on the same
 * thread; do not free it.
 */
const char *flsim_last_error(void);

/**
 * Releases a string allocated by this library.
 *
 * # Safety
 * `ptr` must come from an flsim call that transfers string ownership and
 * must not have been freed already.
 */
void flsim_string_free(char *ptr);

/**
 * Creates a configuration with the reference parameter set.
 */
enum FlsimStatus flsim_config_default(struct FlsimConfig **out);

/**
 * Parses a configuration from a JSON document (unknown keys rejected).
 *
 * # Safety
 * `json` must point to a NUL-terminated string; `out` must be a valid
 * destination pointer.
 */
enum FlsimStatus flsim_config_from_json(const char *json, struct FlsimConfig **out);

/**
 * Serializes a configuration back to JSON; the caller frees the string.
 *
 * # Safety
 * `config` must be a live handle; `out_json` must be valid.
 */
enum FlsimStatus flsim_config_to_json(const struct FlsimConfig *config, char **out_json);

/**
 * Releases a configuration handle.
 *
 * # Safety
 * `config` must come from a `flsim_config_*` constructor and not have been
 * freed already.
 */
void flsim_config_free(struct FlsimConfig *config);

/**
 * Runs a named experiment, writing CSV tables and the JSON sidecar under
 * `out_dir`. On success `out_files_json` (when non-null) receives a JSON
 * array of the written paths; the caller frees it with
 * `flsim_string_free`.
 *
 * # Safety
 * `config` must be a live handle; `experiment` and `out_dir` must be
 * NUL-terminated strings.
 */
enum FlsimStatus flsim_run_experiment(const struct FlsimConfig *config,
                                      const char *experiment,
                                      const char *out_dir,
                                      char **out_files_json);

/**
 * Runs one interconversion (1 = GHZ→W, 2 = W→GHZ) for the configured cycle
 * count and returns an opaque result handle.
 *
 * # Safety
 * `config` must be a live handle; `out` must be valid.
 */
enum FlsimStatus flsim_run_conversion(const struct FlsimConfig *config,
                                      int32_t conversion,
                                      struct FlsimConversionResult **out);

/**
 * Final population of the conversion target state.
 *
 * # Safety
 * `result` must be a live handle.
 */
double flsim_conversion_target_population(const struct FlsimConversionResult *result);

/**
 * Purity of the final state.
 *
 * # Safety
 * `result` must be a live handle.
 */
double flsim_conversion_purity(const struct FlsimConversionResult *result);

/**
 * Total simulated time in seconds.
 *
 * # Safety
 * `result` must be a live handle.
 */
double flsim_conversion_simulated_time(const struct FlsimConversionResult *result);

/**
 * Releases a conversion result handle.
 *
 * # Safety
 * `result` must come from `flsim_run_conversion` and not have been freed.
 */
void flsim_conversion_result_free(struct FlsimConversionResult *result);

/**
 * Overlap ⟨target|ρ_ss|target⟩ and purity of the Floquet steady state for a
 * conversion (1 = GHZ→W, 2 = W→GHZ) at the configured parameters.
 *
 * # Safety
 * `config` must be a live handle; the out pointers, when non-null, must be
 * valid destinations.
 */
enum FlsimStatus flsim_steady_state_figures(const struct FlsimConfig *config,
                                            int32_t conversion,
                                            double *out_population,
                                            double *out_purity,
                                            double *out_spectral_gap_rad_s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLSIM_H */
