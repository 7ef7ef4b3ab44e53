/* Licensed under the Apache License, Version 2.0. */

#ifndef HYPERWALK_H
#define HYPERWALK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum HwStatus {
  HW_STATUS_OK = 0,
  HW_STATUS_NULL_POINTER = 1,
  HW_STATUS_INVALID_UTF8 = 2,
  HW_STATUS_INPUT = 3,
  HW_STATUS_CONFIG = 4,
  HW_STATUS_NUMERIC_DOMAIN = 5,
  HW_STATUS_CONSTRUCTION_FAILED = 6,
  HW_STATUS_INFEASIBLE = 7,
  HW_STATUS_INVARIANT = 8,
  HW_STATUS_OUT_OF_RANGE = 9,
  HW_STATUS_IO = 10,
  HW_STATUS_INTERNAL = 11,
  HW_STATUS_PANIC = 12,
} HwStatus;

/**
 * A validated run configuration.
 */
typedef struct HwConfig HwConfig;

/**
 * Free-group walk with its pivotal stack.
 */
typedef struct HwFreeState HwFreeState;

/**
 * A finished ensemble.
 */
typedef struct HwRun HwRun;

/**
 * Summary of one recorded time.
 */
typedef struct HwGridRow {
  size_t n;
  size_t trials;
  double mean_distance;
  double sd_distance;
  double q10;
  double q50;
  double q90;
  double mean_pivots;
} HwGridRow;

/**
 * Empirical `P(d(o, Z_n o) <= r n)` with its Wilson interval.
 */
typedef struct HwDeviation {
  size_t n;
  size_t successes;
  size_t trials;
  double p;
  double ci_lo;
  double ci_hi;
} HwDeviation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hw_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hw_version(void);

/**
 * Parses a TOML run configuration.
 */
enum HwStatus hw_config_from_toml(const char *toml, struct HwConfig **config);

/**
 * Overrides the master seed.
 */
enum HwStatus hw_config_set_seed(struct HwConfig *config, uint64_t seed);

/**
 * Overrides the number of trajectories.
 */
enum HwStatus hw_config_set_trials(struct HwConfig *config, size_t trials);

void hw_config_free(struct HwConfig *config);

/**
 * Runs the ensemble described by `config` on `workers` threads (0 means
 * all cores). The result does not depend on `workers`.
 */
enum HwStatus hw_run(const struct HwConfig *config, size_t workers, struct HwRun **run);

void hw_run_free(struct HwRun *run);

/**
 * Number of recorded times.
 */
size_t hw_run_grid_len(const struct HwRun *run);

enum HwStatus hw_run_grid_row(const struct HwRun *run, size_t index, struct HwGridRow *row);

/**
 * Deviation estimate at recorded time `index` for the configured rate `r`.
 */
enum HwStatus hw_run_deviation(const struct HwRun *run,
                               double r,
                               size_t index,
                               struct HwDeviation *point);

/**
 * Escape-rate estimate at the last recorded time with a bootstrap interval.
 */
enum HwStatus hw_run_escape_rate(const struct HwRun *run, double *ell, double *lo, double *hi);

/**
 * Total invariant failures seen by paranoid runs (0 otherwise).
 */
size_t hw_run_invariant_failures(const struct HwRun *run);

/**
 * Writes the tables and `summary.json` into directory `dir`.
 */
enum HwStatus hw_run_write(const struct HwRun *run, const char *dir);

struct HwFreeState *hw_free_state_new(void);

void hw_free_state_free(struct HwFreeState *state);

/**
 * Advances by `Z_{n+1} = Z_n s w`. Letters are encoded `2i` for generator
 * `i` and `2i + 1` for its inverse; `w` may be null when `w_len` is 0.
 */
enum HwStatus hw_free_state_step(struct HwFreeState *state,
                                 uint16_t s,
                                 const uint16_t *w,
                                 size_t w_len,
                                 bool *pivotal);

/**
 * Number of pivotal times currently on the stack.
 */
size_t hw_free_state_pivots(const struct HwFreeState *state);

/**
 * Word length of the current position.
 */
size_t hw_free_state_length(const struct HwFreeState *state);

/**
 * Copies up to `cap` letters of the current reduced word into `buf` and
 * stores the full length in `len`.
 */
enum HwStatus hw_free_state_word(const struct HwFreeState *state,
                                 uint16_t *buf,
                                 size_t cap,
                                 size_t *len);

/**
 * Whether the stack invariants hold.
 */
bool hw_free_state_check(const struct HwFreeState *state);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPERWALK_H */
