#ifndef RIS_URLLC_H
#define RIS_URLLC_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RuStatus {
  RU_STATUS_OK = 0,
  RU_STATUS_NULL_POINTER = 1,
  RU_STATUS_INVALID_ARGUMENT = 2,
  RU_STATUS_CONFIG = 3,
  RU_STATUS_SINGULAR = 4,
  RU_STATUS_RUNTIME = 5,
  RU_STATUS_IO = 6,
  RU_STATUS_PANIC = 7,
} RuStatus;

typedef enum RuScheme {
  RU_SCHEME_PROPOSED = 0,
  RU_SCHEME_IDEAL_PHASE = 1,
  RU_SCHEME_SHANNON_RATE = 2,
  RU_SCHEME_SHANNON_IDEAL_PHASE = 3,
  RU_SCHEME_BINARY_SEARCH = 4,
  RU_SCHEME_RANDOM_PHASE = 5,
  RU_SCHEME_WITHOUT_RIS = 6,
} RuScheme;

/**
 * A parsed experiment config with pending overrides.
 */
typedef struct RuExperiment RuExperiment;

/**
 * Aggregated rows of one sweep.
 */
typedef struct RuResult RuResult;

/**
 * Outcome of one solve on one channel draw.
 */
typedef struct RuSolveSummary {
  double sum_rate;
  uint64_t outer_iterations;
  uint64_t inner_iterations;
  uint64_t phase_evaluations;
  bool converged;
} RuSolveSummary;

/**
 * One aggregated output row. Missing means are NaN.
 */
typedef struct RuRow {
  enum RuScheme scheme;
  double sweep_value;
  double mean_sum_rate;
  double std_error;
  size_t trials;
  size_t failures;
  double mean_outer_iters;
  double mean_phase_evaluations;
} RuRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ru_last_error(void);

/**
 * Parses a TOML config from a nul-terminated string.
 *
 * # Safety
 * `text` must be a valid C string and `out` a writable pointer.
 */
enum RuStatus ru_experiment_from_str(const char *text, struct RuExperiment **out);

/**
 * Loads a TOML config file.
 *
 * # Safety
 * `path` must be a valid C string and `out` a writable pointer.
 */
enum RuStatus ru_experiment_load(const char *path, struct RuExperiment **out);

/**
 * # Safety
 * `exp` must come from `ru_experiment_load` or `ru_experiment_from_str`, or be null.
 */
void ru_experiment_free(struct RuExperiment *exp);

/**
 * # Safety
 * `exp` must be a live experiment handle.
 */
enum RuStatus ru_experiment_set_seed(struct RuExperiment *exp, uint64_t seed);

/**
 * # Safety
 * `exp` must be a live experiment handle.
 */
enum RuStatus ru_experiment_set_trials(struct RuExperiment *exp, uint64_t trials);

/**
 * Worker threads for `ru_experiment_run`; 0 selects the default.
 *
 * # Safety
 * `exp` must be a live experiment handle.
 */
enum RuStatus ru_experiment_set_threads(struct RuExperiment *exp, size_t threads);

/**
 * Runs the configured sweep. Output settings in the config are ignored;
 * render the result with `ru_result_to_csv` or `ru_result_to_json`.
 *
 * # Safety
 * `exp` must be a live experiment handle and `out` a writable pointer.
 */
enum RuStatus ru_experiment_run(struct RuExperiment *exp, struct RuResult **out);

/**
 * Solves trial `trial` of the experiment's base system with one scheme.
 *
 * # Safety
 * `exp` must be a live experiment handle and `out` a writable pointer.
 */
enum RuStatus ru_experiment_solve(struct RuExperiment *exp,
                                  enum RuScheme scheme,
                                  uint64_t trial,
                                  struct RuSolveSummary *out);

/**
 * # Safety
 * `res` must come from `ru_experiment_run`, or be null.
 */
void ru_result_free(struct RuResult *res);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `res` must be a live result handle or null.
 */
size_t ru_result_row_count(const struct RuResult *res);

/**
 * # Safety
 * `res` must be a live result handle and `out` a writable pointer.
 */
enum RuStatus ru_result_row(const struct RuResult *res, size_t index, struct RuRow *out);

/**
 * Renders the result as CSV; `trace` selects the per-iteration layout.
 *
 * # Safety
 * `res` must be a live result handle and `out` a writable pointer.
 */
enum RuStatus ru_result_to_csv(const struct RuResult *res, bool trace, char **out);

/**
 * # Safety
 * `res` must be a live result handle and `out` a writable pointer.
 */
enum RuStatus ru_result_to_json(const struct RuResult *res, char **out);

/**
 * # Safety
 * `s` must come from this library, or be null.
 */
void ru_string_free(char *s);

/**
 * Stable lowercase name of a scheme; never null.
 */
const char *ru_scheme_name(enum RuScheme scheme);

/**
 * Inverse Gaussian tail function for `eps` in (0, 1).
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum RuStatus ru_q_inv(double eps, double *out);

/**
 * Finite-blocklength rate in bit/s/Hz; may be negative at low SINR.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum RuStatus ru_fbl_rate(double sinr, double blocklength, double eps, double *out);

/**
 * Channel dispersion in bit^2; NaN for a negative SINR.
 */
double ru_dispersion(double sinr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIS_URLLC_H */
