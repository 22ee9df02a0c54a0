#ifndef RENEWMED_H
#define RENEWMED_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum RmModel {
  RM_MODEL_LINEAR = 0,
  RM_MODEL_LOGISTIC = 1,
} RmModel;

typedef enum RmStatus {
  RM_STATUS_OK = 0,
  /**
   * Bad arguments, malformed data or configuration.
   */
  RM_STATUS_INPUT = 2,
  /**
   * Not enough observations yet.
   */
  RM_STATUS_NOT_READY = 3,
  /**
   * Singular design, non-convergence, separation or degenerate inference.
   */
  RM_STATUS_NUMERICAL = 4,
  /**
   * Corrupt or incompatible checkpoint.
   */
  RM_STATUS_INTEGRITY = 5,
  /**
   * Unexpected internal failure.
   */
  RM_STATUS_INTERNAL = 70,
} RmStatus;

/**
 * Opaque stream handle.
 */
typedef struct RmStream RmStream;

/**
 * Direct-effect estimate and stream metadata.
 */
typedef struct RmSummary {
  double gamma_hat;
  double gamma_se;
  uint64_t n_total;
  uint64_t batch_count;
  bool degenerate_fit;
} RmSummary;

/**
 * Test results for one mediator.
 */
typedef struct RmTestResult {
  double product_hat;
  double sigma_product;
  double t_alpha;
  double t_beta;
  double t_sobel;
  bool large_t;
  double p_sobel;
  double p_asobel;
  double p_js;
  double p_ajs;
  double ci_sobel_lower;
  double ci_sobel_upper;
  double ci_asobel_lower;
  double ci_asobel_upper;
} RmTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an empty stream. Logistic streams always include an outcome intercept.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one `RmStream*`.
 */
enum RmStatus rm_stream_new(enum RmModel model,
                            uintptr_t p,
                            uintptr_t q,
                            bool intercept,
                            struct RmStream **out);

/**
 * Releases a stream. Null is ignored.
 *
 * # Safety
 * `stream` must be null or a handle from this library that has not been freed.
 */
void rm_stream_free(struct RmStream *stream);

/**
 * Folds in `n_rows` observations stored row-major as `Y, X, M1..Mp, Z1..Zq`.
 * On failure the stream is unchanged.
 *
 * # Safety
 * `rows` must point to `n_rows * (2 + p + q)` readable doubles.
 */
enum RmStatus rm_stream_update(struct RmStream *stream, const double *rows, uintptr_t n_rows);

/**
 * Number of mediators `p`, or 0 for a null handle.
 *
 * # Safety
 * `stream` must be null or a live handle.
 */
uintptr_t rm_stream_num_mediators(const struct RmStream *stream);

/**
 * Observations absorbed so far, or 0 for a null handle.
 *
 * # Safety
 * `stream` must be null or a live handle.
 */
uint64_t rm_stream_n_total(const struct RmStream *stream);

/**
 * Batches absorbed so far, or 0 for a null handle.
 *
 * # Safety
 * `stream` must be null or a live handle.
 */
uint64_t rm_stream_batch_count(const struct RmStream *stream);

/**
 * Writes the direct effect into `summary` and the per-mediator estimates into
 * the four arrays, each of length `len`, which must equal `p`. Any array
 * pointer may be null to skip it.
 *
 * # Safety
 * Non-null pointers must be writable for the stated lengths.
 */
enum RmStatus rm_stream_summary(const struct RmStream *stream,
                                struct RmSummary *summary,
                                double *alpha_hat,
                                double *alpha_se,
                                double *beta_hat,
                                double *beta_se,
                                uintptr_t len);

/**
 * Runs the four tests for mediator `j` (0-based) at level `delta`.
 *
 * # Safety
 * `out` must be writable.
 */
enum RmStatus rm_stream_test(const struct RmStream *stream,
                             uintptr_t j,
                             double delta,
                             struct RmTestResult *out);

/**
 * Writes a checkpoint atomically.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string.
 */
enum RmStatus rm_stream_save(const struct RmStream *stream, const char *path);

/**
 * Restores a stream from a checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
enum RmStatus rm_stream_load(const char *path, struct RmStream **out);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * NUL-terminated) and returns the full message length plus one. Returns 0 if
 * there is no message.
 *
 * # Safety
 * `buf` must be null or writable for `len` bytes.
 */
uintptr_t rm_last_error_message(char *buf, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RENEWMED_H */
