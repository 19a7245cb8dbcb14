#ifndef SUPERBALL_H
#define SUPERBALL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_INPUT = 2,
  SB_STATUS_COMPUTATION = 3,
  SB_STATUS_VIOLATION = 4,
  SB_STATUS_PANIC = 5,
} SbStatus;

/**
 * Opaque packing certificate.
 */
typedef struct SbCertificate SbCertificate;

/**
 * Opaque norm space (exponent plus block structure).
 */
typedef struct SbSpace SbSpace;

typedef struct SbConstantChain {
  double p;
  double q;
  double x_p;
  double x_gap;
  double eps_p;
  double delta_at_eps;
  double convexity_gap;
  double c_prime;
  double c_p;
  double c_gap;
  double log_ratio;
} SbConstantChain;

typedef struct SbDensityBound {
  uint32_t n;
  double p;
  double c_p;
  double log_ratio;
  double bound;
  double fugacity_threshold;
} SbDensityBound;

typedef struct SbChainSummary {
  double alpha_hat;
  double alpha_se;
  double fv_hat;
  double fv_se;
  double mean_count;
  double var_count;
  double volume;
  uint64_t final_count;
} SbChainSummary;

typedef struct SbVerification {
  bool valid;
  bool all_inside;
  uint64_t count;
  /**
   * Negative when fewer than two centers.
   */
  double min_pairwise_distance;
  double density;
} SbVerification;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *sb_last_error(void);

/**
 * Creates a space from exponent `p` and `ncuts` block cuts.
 *
 * # Safety
 * `cuts` must point to `ncuts` values and `out` must be writable.
 */
enum SbStatus sb_space_new(double p, const size_t *cuts, size_t ncuts, struct SbSpace **out_space);

/**
 * # Safety
 * `space` must come from [`sb_space_new`] and not be used afterwards.
 */
void sb_space_free(struct SbSpace *space);

/**
 * Dimension of the space, or 0 for NULL.
 *
 * # Safety
 * `space` must be NULL or a live handle.
 */
size_t sb_space_dim(const struct SbSpace *space);

/**
 * # Safety
 * `space` must be a live handle, `x` must point to `len` values.
 */
enum SbStatus sb_norm(const struct SbSpace *space, const double *x, size_t len, double *result);

/**
 * Distance between `x` and `y`. A positive `torus_side` uses the
 * minimum-image distance on that torus; otherwise the flat distance.
 *
 * # Safety
 * `space` must be a live handle, `x` and `y` must point to `len` values.
 */
enum SbStatus sb_distance(const struct SbSpace *space,
                          const double *x,
                          const double *y,
                          size_t len,
                          double torus_side,
                          double *result);

/**
 * # Safety
 * `space` must be a live handle and `result` writable.
 */
enum SbStatus sb_unit_ball_volume(const struct SbSpace *space, double *result);

/**
 * Radius whose superball has unit volume.
 *
 * # Safety
 * `space` must be a live handle and `result` writable.
 */
enum SbStatus sb_r_unit(const struct SbSpace *space, double *result);

/**
 * # Safety
 * `result` must be writable.
 */
enum SbStatus sb_constant_chain(double p, struct SbConstantChain *result);

/**
 * # Safety
 * `result` must be writable.
 */
enum SbStatus sb_density_lower_bound(uint32_t n, double p, struct SbDensityBound *result);

/**
 * Principal branch of the Lambert W function for `x ≥ 0`.
 *
 * # Safety
 * `result` must be writable.
 */
enum SbStatus sb_lambert_w(double x, double *result);

/**
 * Runs the birth–death chain for superballs of radius `r_unit` on a torus of
 * side `torus_side`.
 *
 * # Safety
 * `space` must be a live handle and `result` writable.
 */
enum SbStatus sb_simulate(const struct SbSpace *space,
                          double torus_side,
                          double fugacity,
                          uint64_t steps,
                          uint64_t burn_in,
                          uint64_t seed,
                          struct SbChainSummary *result);

/**
 * Builds a certified packing of radius-`r_unit` superballs in `B(0, big_r)`.
 * A non-positive `eps` selects the default cube side.
 *
 * # Safety
 * `space` must be a live handle and `out_cert` writable.
 */
enum SbStatus sb_pack(const struct SbSpace *space,
                      double big_r,
                      double eps,
                      struct SbCertificate **out_cert);

/**
 * Parses a certificate from NUL-terminated JSON.
 *
 * # Safety
 * `json` must be a valid C string and `out_cert` writable.
 */
enum SbStatus sb_certificate_from_json(const char *json, struct SbCertificate **out_cert);

/**
 * Serializes a certificate. Free the string with [`sb_string_free`].
 *
 * # Safety
 * `cert` must be a live handle and `out_json` writable.
 */
enum SbStatus sb_certificate_to_json(const struct SbCertificate *cert, char **out_json);

/**
 * Recomputes the packing conditions. Returns `Violation` when the
 * certificate is well-formed but not a valid packing; `result` is filled
 * either way.
 *
 * # Safety
 * `cert` must be a live handle and `result` writable.
 */
enum SbStatus sb_certificate_verify(const struct SbCertificate *cert,
                                    struct SbVerification *result);

/**
 * Number of centers, or 0 for NULL.
 *
 * # Safety
 * `cert` must be NULL or a live handle.
 */
size_t sb_certificate_len(const struct SbCertificate *cert);

/**
 * Copies centers row-major into `buf`, which must hold `len × n` values.
 *
 * # Safety
 * `cert` must be a live handle and `buf` must point to `buf_len` writable values.
 */
enum SbStatus sb_certificate_centers(const struct SbCertificate *cert, double *buf, size_t buf_len);

/**
 * # Safety
 * `cert` must come from this library and not be used afterwards.
 */
void sb_certificate_free(struct SbCertificate *cert);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void sb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUPERBALL_H */
