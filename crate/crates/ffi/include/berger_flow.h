#ifndef BERGER_FLOW_H
#define BERGER_FLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BfStatus {
  BF_STATUS_OK = 0,
  BF_STATUS_NULL_POINTER = 1,
  BF_STATUS_INVALID_PARAMETER = 2,
  BF_STATUS_DOMAIN = 3,
  BF_STATUS_BEYOND_EXISTENCE = 4,
  BF_STATUS_KIND_MISMATCH = 5,
  BF_STATUS_STEP_BUDGET = 6,
  BF_STATUS_OUT_OF_RANGE = 7,
  BF_STATUS_PANIC = 8,
} BfStatus;

typedef enum BfFlowKind {
  BF_FLOW_KIND_COLLAPSE = 0,
  BF_FLOW_KIND_NORMALIZED = 1,
} BfFlowKind;

typedef enum BfTerminationTag {
  BF_TERMINATION_TAG_REACHED_T_END = 0,
  BF_TERMINATION_TAG_COLLAPSE_POINT = 1,
  BF_TERMINATION_TAG_COLLAPSE_FIBER = 2,
  BF_TERMINATION_TAG_EQUILIBRIUM = 3,
  BF_TERMINATION_TAG_STEP_UNDERFLOW = 4,
} BfTerminationTag;

/**
 * Opaque integrated trajectory.
 */
typedef struct BfTrajectory BfTrajectory;

typedef struct BfConfig {
  double rtol;
  double atol;
  double collapse_tol;
  double equilib_tol;
  size_t max_steps;
  size_t output_stride;
  bool stop_on_equilibrium;
} BfConfig;

/**
 * Flow selection; `kappa` is `±1` for collapse and `±1/2` for normalized.
 */
typedef struct BfParams {
  enum BfFlowKind kind;
  double a;
  double kappa;
  double epsilon;
} BfParams;

typedef struct BfSample {
  double t;
  double alpha;
  double beta;
  double volume;
  double energy;
  double f;
  double g;
} BfSample;

/**
 * Termination summary; optional values are NaN when absent.
 */
typedef struct BfTermination {
  enum BfTerminationTag tag;
  double t_event;
  double alpha;
  double beta;
  double alpha_threshold_time;
  double beta_infinity;
} BfTermination;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default integrator settings.
 */
struct BfConfig bf_config_default(void);

/**
 * Static name of a status code.
 */
const char *bf_status_name(enum BfStatus status);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL, or
 * 0 when there is no message.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t bf_last_error_message(char *buf, size_t len);

/**
 * Evaluates the vector field at `(x, y)`.
 *
 * # Safety
 * `params`, `dx` and `dy` must be valid pointers.
 */
enum BfStatus bf_vector_field(const struct BfParams *params,
                              double x,
                              double y,
                              double *dx,
                              double *dy);

/**
 * Spinorial energy at `(x, y)`.
 *
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum BfStatus bf_energy(const struct BfParams *params, double x, double y, double *out);

/**
 * Integrates from the Berger start point up to `t_end`. `config` may be null
 * for the defaults. On success `*out` receives a handle owned by the caller.
 *
 * # Safety
 * `params` and `out` must be valid pointers; `config` must be null or valid.
 */
enum BfStatus bf_integrate(const struct BfParams *params,
                           const struct BfConfig *config,
                           double t_end,
                           struct BfTrajectory **out);

/**
 * Number of recorded samples; 0 for a null handle.
 *
 * # Safety
 * `trajectory` must be null or a live handle.
 */
size_t bf_trajectory_len(const struct BfTrajectory *trajectory);

/**
 * Copies sample `index` into `*out`.
 *
 * # Safety
 * `trajectory` must be a live handle and `out` a valid pointer.
 */
enum BfStatus bf_trajectory_sample(const struct BfTrajectory *trajectory,
                                   size_t index,
                                   struct BfSample *out);

/**
 * Copies the termination summary into `*out`.
 *
 * # Safety
 * `trajectory` must be a live handle and `out` a valid pointer.
 */
enum BfStatus bf_trajectory_termination(const struct BfTrajectory *trajectory,
                                        struct BfTermination *out);

/**
 * Releases a trajectory handle; null is ignored.
 *
 * # Safety
 * `trajectory` must be null or a handle from [`bf_integrate`] not yet freed.
 */
void bf_trajectory_free(struct BfTrajectory *trajectory);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BERGER_FLOW_H */
