/* Generated by cbindgen from crates/ffi/src/lib.rs. */

#ifndef RBANDIT_H
#define RBANDIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  RB_STATUS_OK = 0,
  RB_STATUS_NULL_POINTER = 1,
  RB_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON, bad matrices, non-ergodic arms, bad configs.
   */
  RB_STATUS_VALIDATION = 3,
  /**
   * Argument outside the instance (arm index, state, tau).
   */
  RB_STATUS_DOMAIN = 4,
  RB_STATUS_BUFFER_TOO_SMALL = 5,
  RB_STATUS_CONVERGENCE = 6,
  RB_STATUS_NUMERICAL = 7,
  /**
   * Grid or oracle exceeds its size cap.
   */
  RB_STATUS_TOO_LARGE = 8,
  RB_STATUS_IO = 9,
  RB_STATUS_OTHER = 10,
  RB_STATUS_PANIC = 11,
} RbStatus;

/**
 * Validated bandit instance.
 */
typedef struct RbInstance RbInstance;

/**
 * Solved average-reward equation on a belief grid.
 */
typedef struct RbSolution RbSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next call into this library on the same thread.
 */
const char *rb_last_error(void);

/**
 * Library version as a static string.
 */
const char *rb_version(void);

/**
 * Parses `{"arms": [{"transition": [[..]], "rewards": [..]}, ..]}`.
 * `diagnostic` != 0 skips the ergodicity check.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
RbStatus rb_instance_from_json(const char *json, int32_t diagnostic, RbInstance **out);

/**
 * # Safety
 * `inst` must come from `rb_instance_from_json` or be null.
 */
void rb_instance_free(RbInstance *inst);

/**
 * # Safety
 * `inst` must be a live handle; `out` writable.
 */
RbStatus rb_instance_num_arms(const RbInstance *inst, size_t *out);

/**
 * # Safety
 * `inst` must be a live handle; `out` writable.
 */
RbStatus rb_instance_arm_size(const RbInstance *inst, size_t arm, size_t *out);

/**
 * Stationary distribution of `arm` into `out[0..len]`.
 *
 * # Safety
 * `inst` must be a live handle; `out` must hold `len` doubles.
 */
RbStatus rb_stationary(const RbInstance *inst, size_t arm, double *out, size_t len);

/**
 * Solves the average-reward equation on the grid with threshold `tau0`.
 *
 * # Safety
 * `inst` must be a live handle; `out` writable.
 */
RbStatus rb_solve(const RbInstance *inst, uint32_t tau0, RbSolution **out);

/**
 * # Safety
 * `sol` must come from `rb_solve` or be null.
 */
void rb_solution_free(RbSolution *sol);

/**
 * # Safety
 * `sol` must be a live handle; `out` writable.
 */
RbStatus rb_solution_gain(const RbSolution *sol, double *out);

/**
 * # Safety
 * `sol` must be a live handle; `out` writable.
 */
RbStatus rb_solution_grid_size(const RbSolution *sol, size_t *out);

/**
 * Per-arm right-hand-side values at the information state (s, tau), both
 * of length `k`, into `out[0..len]`.
 *
 * # Safety
 * `sol` must be a live handle; `s` and `tau` must hold `k` entries; `out`
 * must hold `len` doubles.
 */
RbStatus rb_solution_action_values(const RbSolution *sol,
                                   const size_t *s,
                                   const uint64_t *tau,
                                   size_t k,
                                   double *out,
                                   size_t len);

/**
 * Optimal expected reward over `horizon` steps from (s, tau) with known
 * dynamics.
 *
 * # Safety
 * `inst` must be a live handle; `s` and `tau` must hold `k` entries; `out`
 * writable.
 */
RbStatus rb_oracle_value(const RbInstance *inst,
                         const size_t *s,
                         const uint64_t *tau,
                         size_t k,
                         uint32_t horizon,
                         double *out);

/**
 * Runs an experiment from its JSON config. `out_dir` may be null to use the
 * config's directory; `workers` = 0 uses all cores. On success `*manifest`
 * receives the manifest as JSON, released with `rb_string_free`.
 *
 * # Safety
 * `config_json` and non-null `out_dir` must be NUL-terminated; `manifest`
 * writable.
 */
RbStatus rb_run_experiment(const char *config_json,
                           const char *out_dir,
                           size_t workers,
                           char **manifest);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void rb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RBANDIT_H */
