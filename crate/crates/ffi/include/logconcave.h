#ifndef LOGCONCAVE_H
#define LOGCONCAVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum LcStatus {
  LC_STATUS_OK = 0,
  LC_STATUS_NULL_POINTER = 1,
  LC_STATUS_INVALID_INPUT = 2,
  LC_STATUS_DOMAIN = 3,
  LC_STATUS_NOT_CONVERGED = 4,
  LC_STATUS_QUADRATURE = 5,
  LC_STATUS_PARSE = 6,
  LC_STATUS_IO = 7,
  LC_STATUS_TOO_MANY_FAILURES = 8,
  LC_STATUS_BUFFER_TOO_SMALL = 9,
  LC_STATUS_PANIC = 10,
} LcStatus;

/**
 * Opaque fitted log-concave density.
 */
typedef struct LcFit LcFit;

/**
 * Opaque sorted, tie-merged sample.
 */
typedef struct LcSample LcSample;

/**
 * Certificate residuals of a fit, see `lc_certify`.
 */
typedef struct LcCertificate {
  double max_violation_char1;
  double max_eq_residual_char1;
  double max_violation_char2;
  bool pass;
} LcCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Empty if none failed.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *lc_last_error_message(void);

/**
 * Builds a sample from `len` observations.
 *
 * # Safety
 * `values` must point to `len` readable doubles and `out` must be writable.
 */
enum LcStatus lc_sample_new(const double *values, size_t len, struct LcSample **out);

/**
 * # Safety
 * `sample` must be null or a handle from `lc_sample_new` not yet freed.
 */
void lc_sample_free(struct LcSample *sample);

/**
 * Fits the log-concave MLE with default solver settings.
 *
 * # Safety
 * `sample` must be a live sample handle and `out` writable.
 */
enum LcStatus lc_fit(const struct LcSample *sample, struct LcFit **out);

/**
 * # Safety
 * `fit` must be null or a handle from `lc_fit` not yet freed.
 */
void lc_fit_free(struct LcFit *fit);

/**
 * # Safety
 * `fit` must be a live fit handle and `out` writable.
 */
enum LcStatus lc_fit_knot_count(const struct LcFit *fit, size_t *out);

/**
 * Copies knot positions and log-density values into caller buffers of
 * `capacity` doubles each. Either buffer may be null to skip it.
 *
 * # Safety
 * Non-null buffers must hold `capacity` writable doubles.
 */
enum LcStatus lc_fit_knots(const struct LcFit *fit, double *knots, double *values, size_t capacity);

/**
 * `phi_hat(x)`, `-inf` outside the sample hull.
 *
 * # Safety
 * `fit` must be a live fit handle and `out` writable.
 */
enum LcStatus lc_fit_eval_phi(const struct LcFit *fit, double x, double *out);

/**
 * `phi_hat'(x+)`; `LC_STATUS_DOMAIN` left of the hull.
 *
 * # Safety
 * `fit` must be a live fit handle and `out` writable.
 */
enum LcStatus lc_fit_eval_phi_rderiv(const struct LcFit *fit, double x, double *out);

/**
 * # Safety
 * `fit` must be a live fit handle and `out` writable.
 */
enum LcStatus lc_fit_cdf(const struct LcFit *fit, double x, double *out);

/**
 * # Safety
 * `fit` must be a live fit handle and `out` writable.
 */
enum LcStatus lc_fit_mean_excess(const struct LcFit *fit, double x, double *out);

/**
 * Certifies `fit` against `sample` with the default tolerances.
 *
 * # Safety
 * `fit` and `sample` must be live handles and `out` writable.
 */
enum LcStatus lc_certify(const struct LcFit *fit,
                         const struct LcSample *sample,
                         struct LcCertificate *out);

/**
 * Mean of the log-linear density `e^{tu}` on `[0, 1]`.
 */
double lc_nu(double t);

/**
 * `t - log(1 + t)` for `t > -1`, `+inf` otherwise.
 */
double lc_chernov_h(double t);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOGCONCAVE_H */
