#ifndef PFX_H
#define PFX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Zero is success; `PFX_STATUS_REFUTED` is only returned by
 * [`pfx_run_spec`] and mirrors the command-line exit code 2.
 */
typedef enum PfxStatus {
  PFX_STATUS_OK = 0,
  PFX_STATUS_NULL_POINTER = 1,
  PFX_STATUS_REFUTED = 2,
  PFX_STATUS_INVALID_UTF8 = 3,
  PFX_STATUS_PARSE = 4,
  PFX_STATUS_VALIDATION = 5,
  PFX_STATUS_DOMAIN = 6,
  PFX_STATUS_EVALUATION = 7,
  PFX_STATUS_NO_ELIGIBLE_PAIRS = 8,
  PFX_STATUS_INSUFFICIENT_DATA = 9,
  PFX_STATUS_GAUGE_REJECTED = 10,
  PFX_STATUS_IO = 11,
  PFX_STATUS_BUFFER_TOO_SMALL = 12,
  PFX_STATUS_PANIC = 13,
} PfxStatus;

/**
 * Why an iteration stopped.
 */
typedef enum PfxStopReason {
  PFX_STOP_REASON_FIXED_POINT = 0,
  PFX_STOP_REASON_TOLERANCE_MET = 1,
  PFX_STOP_REASON_MAX_ITERS = 2,
  PFX_STOP_REASON_DOMAIN_EXIT = 3,
} PfxStopReason;

/**
 * Which series [`pfx_trace_copy`] reads.
 */
typedef enum PfxTraceSeries {
  /**
   * x_0..x_N
   */
  PFX_TRACE_SERIES_POINTS = 0,
  /**
   * gamma_n = D(x_{n+1}, x_n)
   */
  PFX_TRACE_SERIES_GAMMA = 1,
  /**
   * d(x_{n+1}, x_n)
   */
  PFX_TRACE_SERIES_EXACT_STEPS = 2,
  /**
   * F(gamma_n), while recorded
   */
  PFX_TRACE_SERIES_F_GAMMA = 3,
} PfxTraceSeries;

/**
 * An F-gauge.
 */
typedef struct PfxGauge PfxGauge;

/**
 * A scalar self-map.
 */
typedef struct PfxMap PfxMap;

/**
 * A perturbed metric `D = d + P` on a scalar interval.
 */
typedef struct PfxMetric PfxMetric;

/**
 * A recorded Picard iteration.
 */
typedef struct PfxTrace PfxTrace;

/**
 * Outcome of [`pfx_certify`]. `worst_margin` is NaN when every pair was
 * skipped.
 */
typedef struct PfxCertResult {
  bool certified;
  double worst_margin;
  double worst_x;
  double worst_y;
  size_t pairs_checked;
  size_t pairs_skipped_zero;
} PfxCertResult;

/**
 * Outcome of [`pfx_bvp_solve`].
 */
typedef struct PfxBvpResult {
  enum PfxStopReason stop_reason;
  size_t iterations;
  double sup_norm;
  double residual;
} PfxBvpResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message for the last failed call on this thread, or NULL. The
 * pointer stays valid until the next `pfx_*` call on the same thread.
 */
const char *pfx_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *pfx_version(void);

/**
 * Builds a metric on `[lo, hi]` from expressions in `x, y`. `perturbation`
 * may be NULL for P = 0. Bounds may be infinite.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` must be writable.
 */
enum PfxStatus pfx_metric_new(const char *distance,
                              const char *perturbation,
                              double lo,
                              double hi,
                              struct PfxMetric **out);

/**
 * Builtin metrics: `"product"` (|x-y| + x^2 y^4 on the real line),
 * `"quartic"` (|x-y| + (x-y)^4 on [0, 1]) and `"quadratic"`
 * (|x-y| + (x-y)^2 on [0, 1]).
 *
 * # Safety
 * `name` must be NUL-terminated; `out` must be writable.
 */
enum PfxStatus pfx_metric_builtin(const char *name, struct PfxMetric **out);

/**
 * # Safety
 * `m` must be NULL or a handle from `pfx_metric_new`/`pfx_metric_builtin`
 * that has not been freed.
 */
void pfx_metric_free(struct PfxMetric *m);

/**
 * D(x, y).
 *
 * # Safety
 * `m` must be a live metric handle; `out` must be writable.
 */
enum PfxStatus pfx_metric_distance(const struct PfxMetric *m, double x, double y, double *out);

/**
 * The exact metric d(x, y) = D(x, y) - P(x, y).
 *
 * # Safety
 * `m` must be a live metric handle; `out` must be writable.
 */
enum PfxStatus pfx_metric_exact(const struct PfxMetric *m, double x, double y, double *out);

/**
 * Audits (P1)-(P4) for the exact metric on `points[0..n]`.
 *
 * # Safety
 * `points` must hold `n` readable doubles; out-pointers must be writable.
 */
enum PfxStatus pfx_metric_audit(const struct PfxMetric *m,
                                const double *points,
                                size_t n,
                                double tol,
                                bool *out_passed,
                                size_t *out_violations);

/**
 * Finds the triple maximizing D(x,y) - D(x,z) - D(z,y) over `points`.
 * `out_found` is false when no excess exceeds `tol`; otherwise
 * `out_xyz` receives x, y, z and `out_gap` the excess.
 *
 * # Safety
 * `points` must hold `n` readable doubles, `out_xyz` three writable
 * doubles; other out-pointers must be writable.
 */
enum PfxStatus pfx_metric_triangle_witness(const struct PfxMetric *m,
                                           const double *points,
                                           size_t n,
                                           double tol,
                                           bool *out_found,
                                           double *out_xyz,
                                           double *out_gap);

/**
 * A self-map of `[lo, hi]` given as an expression in `x`.
 *
 * # Safety
 * `expr` must be NUL-terminated; `out` must be writable.
 */
enum PfxStatus pfx_map_new(const char *expr, double lo, double hi, struct PfxMap **out);

/**
 * T(x).
 *
 * # Safety
 * `map` must be a live map handle; `out` must be writable.
 */
enum PfxStatus pfx_map_apply(const struct PfxMap *map, double x, double *out);

/**
 * # Safety
 * `map` must be NULL or a live handle from `pfx_map_new`.
 */
void pfx_map_free(struct PfxMap *map);

/**
 * A gauge: a builtin name (`ln`, `ln_plus_x`, `neg_inv_sqrt`,
 * `ln_quadratic`) or an expression in `t`. `k` is the (F3) exponent
 * claimed for expression gauges and ignored for builtins.
 *
 * # Safety
 * `spec` must be NUL-terminated; `out` must be writable.
 */
enum PfxStatus pfx_gauge_new(const char *spec, double k, struct PfxGauge **out);

/**
 * F(t) for t > 0.
 *
 * # Safety
 * `g` must be a live gauge handle; `out` must be writable.
 */
enum PfxStatus pfx_gauge_eval(const struct PfxGauge *g, double t, double *out);

/**
 * Audits (F1)-(F3) with exponent `k` on `n` log-spaced points in
 * `[t_min, t_max]`, using M = 10, eps = 1e-2 and t_small = 1e-8.
 *
 * # Safety
 * `g` must be a live gauge handle; out-pointers must be writable.
 */
enum PfxStatus pfx_gauge_audit(const struct PfxGauge *g,
                               double k,
                               double t_min,
                               double t_max,
                               size_t n,
                               bool *out_passed,
                               size_t *out_violations);

/**
 * # Safety
 * `g` must be NULL or a live handle from `pfx_gauge_new`.
 */
void pfx_gauge_free(struct PfxGauge *g);

/**
 * Checks tau + F(D(Tx,Ty)) <= F(D(x,y)) (within `tol`) on the
 * `grid x grid` pairs of the map's domain.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum PfxStatus pfx_certify(const struct PfxMap *map,
                           const struct PfxMetric *metric,
                           const struct PfxGauge *gauge,
                           double tau,
                           size_t grid,
                           double tol,
                           struct PfxCertResult *out);

/**
 * The largest tau admitted by the `grid x grid` pairs.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum PfxStatus pfx_tau_max(const struct PfxMap *map,
                           const struct PfxMetric *metric,
                           const struct PfxGauge *gauge,
                           size_t grid,
                           double *out);

/**
 * Picard iteration from `x0`. `gauge` may be NULL; when given, F(gamma_n)
 * is recorded.
 *
 * # Safety
 * `map` and `metric` must be live; `gauge` live or NULL; `out` writable.
 */
enum PfxStatus pfx_iterate(const struct PfxMap *map,
                           const struct PfxMetric *metric,
                           const struct PfxGauge *gauge,
                           double x0,
                           double tol,
                           size_t max_iters,
                           struct PfxTrace **out);

/**
 * Number of iterates x_0..x_N (one more than the number of steps).
 *
 * # Safety
 * `t` must be a live trace handle.
 */
size_t pfx_trace_len(const struct PfxTrace *t);

/**
 * # Safety
 * `t` must be a live trace handle; `out` must be writable.
 */
enum PfxStatus pfx_trace_stop_reason(const struct PfxTrace *t, enum PfxStopReason *out);

/**
 * Copies a series into `buf` (capacity `cap`) and stores its length in
 * `out_len`. Returns `PFX_STATUS_BUFFER_TOO_SMALL` (with `out_len` set)
 * when `cap` is short; `buf` may then be NULL.
 *
 * # Safety
 * `t` must be a live trace; `buf` must hold `cap` writable doubles.
 */
enum PfxStatus pfx_trace_copy(const struct PfxTrace *t,
                              enum PfxTraceSeries series,
                              double *buf,
                              size_t cap,
                              size_t *out_len);

/**
 * # Safety
 * `t` must be NULL or a live handle from `pfx_iterate`.
 */
void pfx_trace_free(struct PfxTrace *t);

/**
 * Solves -u'' = f(t, u), u(0) = u(1) = 0 by Picard iteration of the Green
 * operator. `f` is an expression in `s, u`; `u0` an expression in `t`
 * (NULL for u0 = 0). The solution on the `n_nodes` uniform nodes is
 * written to `out_u`.
 *
 * # Safety
 * Strings must be NUL-terminated; `out_u` must hold `n_nodes` writable
 * doubles; `out` must be writable.
 */
enum PfxStatus pfx_bvp_solve(const char *f,
                             const char *u0,
                             double tau,
                             size_t n_nodes,
                             double tol,
                             size_t max_iters,
                             double *out_u,
                             struct PfxBvpResult *out);

/**
 * Parses and runs a spec document, writing outputs into `out_dir` exactly
 * as the `pfx` command does. Returns `PFX_STATUS_OK` when the spec is
 * affirmed and `PFX_STATUS_REFUTED` when it is refuted.
 *
 * # Safety
 * Both strings must be NUL-terminated.
 */
enum PfxStatus pfx_run_spec(const char *spec_text, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PFX_H */
