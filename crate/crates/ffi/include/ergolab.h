#ifndef ERGOLAB_H
#define ERGOLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  ERGO_STATUS_OK = 0,
  ERGO_STATUS_NULL_POINTER = 1,
  ERGO_STATUS_INVALID_ARGUMENT = 2,
  ERGO_STATUS_INFEASIBLE = 3,
  ERGO_STATUS_CONFIG = 4,
  ERGO_STATUS_IO = 5,
  ERGO_STATUS_PANIC = 6,
  ERGO_STATUS_OTHER = 7,
} ErgoStatus;

/**
 * A real function on the atoms of a system.
 */
typedef struct ErgoObservable ErgoObservable;

/**
 * A sculpted function with its per-stage report.
 */
typedef struct ErgoPlan ErgoPlan;

/**
 * A finite system.
 */
typedef struct ErgoSystem ErgoSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; valid until the next call.
 */
const char *ergo_last_error(void);

/**
 * Library version as a static string.
 */
const char *ergo_version(void);

/**
 * Box torus with periods `dims[0..d]`; `d = 1` is the cycle.
 *
 * # Safety
 * `dims` must point to `d` values and `system_out` must be writable.
 */
ErgoStatus ergo_system_torus(const size_t *dims, size_t d, ErgoSystem **system_out);

/**
 * # Safety
 * `system` must come from this library and not be used afterwards.
 */
void ergo_system_free(ErgoSystem *system);

/**
 * # Safety
 * `system` must be a live handle.
 */
size_t ergo_system_atoms(const ErgoSystem *system);

/**
 * Copies `len` values into a new observable on `system`.
 *
 * # Safety
 * `values` must point to `len` doubles; handles must be live.
 */
ErgoStatus ergo_observable_new(const ErgoSystem *system,
                               const double *values,
                               size_t len,
                               ErgoObservable **observable_out);

/**
 * Seeded uniform values on `[-1, 1]`, centered when `zero_mean` is nonzero.
 *
 * # Safety
 * Handles must be live and `observable_out` writable.
 */
ErgoStatus ergo_observable_random(const ErgoSystem *system,
                                  uint64_t seed,
                                  int32_t zero_mean,
                                  ErgoObservable **observable_out);

/**
 * # Safety
 * `observable` must come from this library and not be used afterwards.
 */
void ergo_observable_free(ErgoObservable *observable);

/**
 * Copies the values into `buf`, which must hold the observable's length.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
ErgoStatus ergo_observable_values(const ErgoObservable *observable, double *buf, size_t len);

/**
 * Cube average `P_N f`.
 *
 * # Safety
 * Handles must be live and `observable_out` writable.
 */
ErgoStatus ergo_cube_average(const ErgoSystem *system,
                             const ErgoObservable *observable,
                             size_t n,
                             ErgoObservable **observable_out);

/**
 * Residual measure of the height-`n` tower on a cycle.
 *
 * # Safety
 * `system` must be live and `mu_out` writable.
 */
ErgoStatus ergo_rokhlin_residual(const ErgoSystem *system, size_t n, double eps, double *mu_out);

/**
 * Sculpts from an experiment config text holding a `[sculpt]` table.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; handles must be live.
 */
ErgoStatus ergo_sculpt(const ErgoSystem *system, const char *config_toml, ErgoPlan **plan_out);

/**
 * # Safety
 * `plan` must come from this library and not be used afterwards.
 */
void ergo_plan_free(ErgoPlan *plan);

/**
 * # Safety
 * `plan` must be a live handle.
 */
size_t ergo_plan_stages(const ErgoPlan *plan);

/**
 * Scale `N_j` and W1 distance to the target for stage `j` (1-based).
 * The distance is NaN when the stage average vanishes.
 *
 * # Safety
 * `plan` must be live and the out pointers writable.
 */
ErgoStatus ergo_plan_stage(const ErgoPlan *plan,
                           size_t j,
                           size_t *n_out,
                           double *w1_out,
                           double *tail_out);

/**
 * Composite function of the plan.
 *
 * # Safety
 * `plan` must be live and `observable_out` writable.
 */
ErgoStatus ergo_plan_function(const ErgoPlan *plan, ErgoObservable **observable_out);

/**
 * Same as the `ergolab` binary: validates, runs and writes into `out_dir`.
 *
 * # Safety
 * All strings must be NUL-terminated.
 */
ErgoStatus ergo_run_experiment(const char *kind, const char *config_toml, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ERGOLAB_H */
