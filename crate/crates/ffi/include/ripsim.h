#ifndef RIPSIM_H
#define RIPSIM_H

/* Generated by cbindgen from ripsim-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible `ripsim_*` call.
 */
typedef enum RipsimStatus {
  /**
   * The call succeeded and all out-parameters are set.
   */
  RIPSIM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RIPSIM_STATUS_NULL_POINTER = 1,
  /**
   * An argument failed validation: bad grid parameters, wrong series
   * length, out-of-range values, or non-finite data.
   */
  RIPSIM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The input was well-formed but no estimate could be produced.
   */
  RIPSIM_STATUS_ESTIMATION_FAILED = 3,
  /**
   * A panic was caught at the boundary. Memory is intact, but the call's
   * out-parameters must be considered unset.
   */
  RIPSIM_STATUS_PANIC = 4,
} RipsimStatus;

/**
 * Opaque measurement-grid handle. Create with [`ripsim_grid_new`], release
 * with [`ripsim_grid_free`].
 */
typedef struct RipsimGrid RipsimGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a measurement grid and stores the handle in `*out_grid`.
 *
 * `f_b0` is sender B's base frequency in Hz, `tone_gap` the A−B frequency
 * offset in Hz, `delta_f` the tuning step in Hz, and `num_freqs` the number
 * of measurement steps.
 *
 * # Safety
 * `out_grid` must be a valid pointer to writable storage.
 */
enum RipsimStatus ripsim_grid_new(double f_b0,
                                  double tone_gap,
                                  double delta_f,
                                  size_t num_freqs,
                                  struct RipsimGrid **out_grid);

/**
 * Releases a grid handle. A null `grid` is a no-op.
 *
 * # Safety
 * `grid` must be null or a handle from [`ripsim_grid_new`] that has not
 * been freed already.
 */
void ripsim_grid_free(struct RipsimGrid *grid);

/**
 * Wraps an angle in radians into (−π, π]. NaN propagates.
 */
double ripsim_wrap_to_pi(double angle);

/**
 * Estimates one channel's multipath profile from `len` amplitude samples
 * (one per grid step, in step order), using the default estimator settings
 * for the grid.
 *
 * `sender` is 0 for A, 1 for B. Up to `cap` recovered components are
 * written to the parallel arrays `out_alpha` (amplitude ratios), `out_tau`
 * (delays, seconds), and `out_theta` (phases, radians); the count goes to
 * `*out_count` and the estimated line-of-sight amplitude to `*out_los`.
 * `cap` must cover the estimator's path budget (4 with default settings) or
 * the call fails with `InvalidArgument` rather than truncate.
 *
 * # Safety
 * `amplitudes` must point to `len` readable doubles; `out_alpha`,
 * `out_tau`, `out_theta` to `cap` writable doubles each; `out_count` and
 * `out_los` to writable storage; `grid` must be a live handle.
 */
enum RipsimStatus ripsim_estimate_channel_profile(const struct RipsimGrid *grid,
                                                  const double *amplitudes,
                                                  size_t len,
                                                  uint32_t sender,
                                                  double *out_alpha,
                                                  double *out_tau,
                                                  double *out_theta,
                                                  size_t cap,
                                                  size_t *out_count,
                                                  double *out_los);

/**
 * Evaluates the phase distortion (radians) that a multipath profile of
 * `count` components induces at frequency `f` Hz, writing it to `*out_eps`.
 *
 * The arrays mirror the output of [`ripsim_estimate_channel_profile`];
 * `count` may be zero, which yields zero distortion.
 *
 * # Safety
 * `alpha`, `tau`, `theta` must point to `count` readable doubles each
 * (null is accepted when `count` is zero); `out_eps` must be writable.
 */
enum RipsimStatus ripsim_predict_phase_error(const double *alpha,
                                             const double *tau,
                                             const double *theta,
                                             size_t count,
                                             double f,
                                             double *out_eps);

/**
 * Recovers the q-range (meters) from `len` phase-difference samples (one
 * per grid step) by maximum-score search over the grid's unambiguous
 * range. Writes the range to `*out_d` and its mean-cosine score (1 is a
 * perfect fit) to `*out_score`.
 *
 * # Safety
 * `phases` must point to `len` readable doubles; `out_d` and `out_score`
 * must be writable; `grid` must be a live handle.
 */
enum RipsimStatus ripsim_estimate_qrange(const struct RipsimGrid *grid,
                                         const double *phases,
                                         size_t len,
                                         double *out_d,
                                         double *out_score);

/**
 * Returns the library version as a static NUL-terminated UTF-8 string.
 */
const char *ripsim_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIPSIM_H */
