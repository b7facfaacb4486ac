#ifndef RICCI_GEOM_H
#define RICCI_GEOM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RgStatus {
  RG_STATUS_OK = 0,
  RG_STATUS_NULL_POINTER = 1,
  RG_STATUS_INVALID_ARGUMENT = 2,
  RG_STATUS_PARSE_ERROR = 3,
  RG_STATUS_OUTSIDE_DOMAIN = 4,
  RG_STATUS_DEGENERATE = 5,
  RG_STATUS_NUMERICAL = 6,
  RG_STATUS_NO_BLOW_UP = 7,
  RG_STATUS_PANIC = 8,
} RgStatus;

typedef enum RgCausalClass {
  RG_CAUSAL_CLASS_SPACELIKE = 0,
  RG_CAUSAL_CLASS_TIMELIKE = 1,
  RG_CAUSAL_CLASS_NULL = 2,
  RG_CAUSAL_CLASS_ZERO = 3,
} RgCausalClass;

/**
 * Opaque vector field handle, tied to the chart of the metric it was parsed on.
 */
typedef struct RgField RgField;

/**
 * Opaque metric handle.
 */
typedef struct RgMetric RgMetric;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Valid until the next
 * call into this library from the same thread.
 */
const char *rg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rg_version(void);

/**
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RgStatus rg_metric_builtin(const char *name, struct RgMetric **out);

/**
 * Metric from `dim * dim` component expressions in the coordinates `coords`.
 * The chart has no domain constraints.
 *
 * # Safety
 * `coords` must hold `dim` strings, `components` `dim * dim` strings, and
 * `signature` (for example `"-+++"`) must be NUL-terminated.
 */
enum RgStatus rg_metric_new(const char *const *coords,
                            size_t dim,
                            const char *const *components,
                            const char *signature,
                            struct RgMetric **out);

/**
 * # Safety
 * `metric` must come from a constructor of this library and not be used afterwards.
 */
void rg_metric_free(struct RgMetric *metric);

/**
 * Chart dimension, or 0 for a null handle.
 *
 * # Safety
 * `metric` must be null or a live handle.
 */
size_t rg_metric_dim(const struct RgMetric *metric);

/**
 * `out[k*m*m + i*m + j] = Gamma^k_ij`.
 *
 * # Safety
 * `x` must hold `n` doubles and `out` room for `n^3`.
 */
enum RgStatus rg_christoffel(const struct RgMetric *metric, const double *x, size_t n, double *out);

/**
 * Ricci tensor, `n * n` row-major.
 *
 * # Safety
 * `x` must hold `n` doubles and `out` room for `n^2`.
 */
enum RgStatus rg_ricci(const struct RgMetric *metric, const double *x, size_t n, double *out);

/**
 * # Safety
 * `x` must hold `n` doubles; `out` must be valid.
 */
enum RgStatus rg_scalar_curvature(const struct RgMetric *metric,
                                  const double *x,
                                  size_t n,
                                  double *out);

/**
 * Vector field from `dim` component expressions in the metric's coordinates.
 *
 * # Safety
 * `components` must hold `rg_metric_dim(metric)` NUL-terminated strings.
 */
enum RgStatus rg_field_new(const struct RgMetric *metric,
                           const char *const *components,
                           struct RgField **out);

/**
 * # Safety
 * `field` must come from [`rg_field_new`] and not be used afterwards.
 */
void rg_field_free(struct RgField *field);

/**
 * `max |nabla_i A - alpha_i A + ½<A,A> e_i|` at `x`.
 *
 * # Safety
 * Handles must be live; `x` must hold `n` doubles; `out` must be valid.
 */
enum RgStatus rg_atp_residual(const struct RgMetric *metric,
                              const struct RgField *field,
                              const double *x,
                              size_t n,
                              double *out);

/**
 * # Safety
 * Handles must be live; `x` must hold `n` doubles; `out` must be valid.
 */
enum RgStatus rg_causal_class(const struct RgMetric *metric,
                              const struct RgField *field,
                              const double *x,
                              size_t n,
                              enum RgCausalClass *out);

/**
 * Blow-up time of `a' = a^2`, `a(0) = eps * alpha`, searched on `[0, t_max]`.
 * Returns `NoBlowUp` when the solution stays bounded there.
 *
 * # Safety
 * `out` must be valid.
 */
enum RgStatus rg_null_blowup(double alpha, double eps, double t_max, double *out);

/**
 * Blow-up time of `y' = ½ y^2 + f(t)`, `y(0) = y0 > 0`, for a forcing
 * expression in `t` that is positive on `[0, 2/y0 + 1]`.
 *
 * # Safety
 * `forcing` must be NUL-terminated; `out` must be valid.
 */
enum RgStatus rg_riccati_blowup(const char *forcing, double y0, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RICCI_GEOM_H */
