#ifndef RANDTRI_H
#define RANDTRI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RandtriStatus {
  RANDTRI_STATUS_OK = 0,
  RANDTRI_STATUS_NULL_POINTER = 1,
  RANDTRI_STATUS_INVALID_ARGUMENT = 2,
  RANDTRI_STATUS_DIMENSION = 3,
  RANDTRI_STATUS_GRID_MISMATCH = 4,
  RANDTRI_STATUS_OVERFLOW = 5,
  RANDTRI_STATUS_BUFFER_TOO_SMALL = 6,
  RANDTRI_STATUS_PANIC = 7,
} RandtriStatus;

typedef enum RandtriScale {
  RANDTRI_SCALE_ONE_OVER_N = 0,
  RANDTRI_SCALE_PI_OVER_N = 1,
  /**
   * Entries multiplied by a caller-supplied constant.
   */
  RANDTRI_SCALE_CUSTOM = 2,
} RandtriScale;

/**
 * Ensemble description.
 */
typedef struct RandtriEnsemble RandtriEnsemble;

/**
 * Piecewise polynomial on a uniform grid of `[0, 1]`.
 */
typedef struct RandtriGrid RandtriGrid;

/**
 * Dense lower-triangular matrix.
 */
typedef struct RandtriMatrix RandtriMatrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap - 1` bytes) and returns its full length in bytes.
 */
uintptr_t randtri_last_error(char *buf, uintptr_t cap);

enum RandtriStatus randtri_ensemble_gaussian(double mean,
                                             double stddev,
                                             struct RandtriEnsemble **out);

/**
 * Zero/one entries with `P(1) = p`.
 */
enum RandtriStatus randtri_ensemble_bernoulli(double p, struct RandtriEnsemble **out);

/**
 * Entries `1/δ` with probability `δ = N^(-d)`.
 */
enum RandtriStatus randtri_ensemble_sparse_bernoulli(double d, struct RandtriEnsemble **out);

enum RandtriStatus randtri_ensemble_constant(double value, struct RandtriEnsemble **out);

/**
 * `factor` is used only with [`RandtriScale::Custom`].
 */
enum RandtriStatus randtri_ensemble_set_scale(struct RandtriEnsemble *ens,
                                              enum RandtriScale scale,
                                              double factor);

void randtri_ensemble_free(struct RandtriEnsemble *ens);

/**
 * The deterministic matrix `T_N` (lower entries `1/N`).
 */
enum RandtriStatus randtri_make_t(uintptr_t n, struct RandtriMatrix **out);

/**
 * One sample of `X_N`, reproducible from `(master_seed, trial)`.
 */
enum RandtriStatus randtri_sample_x(const struct RandtriEnsemble *ens,
                                    uintptr_t n,
                                    uint64_t master_seed,
                                    uint64_t trial,
                                    struct RandtriMatrix **out);

void randtri_matrix_free(struct RandtriMatrix *m);

/**
 * Matrix dimension, or 0 for a null handle.
 */
uintptr_t randtri_matrix_dim(const struct RandtriMatrix *m);

/**
 * Row-major entries (`n²` values).
 */
enum RandtriStatus randtri_matrix_entries(const struct RandtriMatrix *m,
                                          double *buf,
                                          uintptr_t cap,
                                          uintptr_t *needed);

/**
 * Singular values in descending order (`n` values).
 */
enum RandtriStatus randtri_singular_values(const struct RandtriMatrix *m,
                                           double *buf,
                                           uintptr_t cap,
                                           uintptr_t *needed);

/**
 * `2/(π(2k+1))` for `k = 0..count`.
 */
enum RandtriStatus randtri_volterra_reference(uintptr_t count, double *buf, uintptr_t cap);

/**
 * Exact `Tr((N²T*T)^pow)` with its lower and upper bounds. Returns
 * `Overflow` when any of the three does not fit in 64 bits.
 */
enum RandtriStatus randtri_trace_power_t(uintptr_t n,
                                         uint32_t pow,
                                         uint64_t *lower,
                                         uint64_t *exact,
                                         uint64_t *upper);

/**
 * Whether `N²T*T` equals the sum of the leading all-ones blocks.
 */
enum RandtriStatus randtri_ones_block_check(uintptr_t n, bool *holds);

/**
 * Piecewise-constant function with the given cell values.
 */
enum RandtriStatus randtri_grid_piecewise_constant(const double *values,
                                                   uintptr_t cells,
                                                   struct RandtriGrid **out);

enum RandtriStatus randtri_grid_constant(uintptr_t cells, double value, struct RandtriGrid **out);

void randtri_grid_free(struct RandtriGrid *g);

uintptr_t randtri_grid_cells(const struct RandtriGrid *g);

enum RandtriStatus randtri_grid_norm(const struct RandtriGrid *g, double *out);

/**
 * `‖W_N M W_N* f − V f‖₂` for a matrix `M` of size `N` dividing the grid.
 */
enum RandtriStatus randtri_riemann_error(const struct RandtriMatrix *m,
                                         const struct RandtriGrid *f,
                                         double *out);

/**
 * SOT error `‖W_N X_N W_N* u − μ V u‖₂` of one sample.
 */
enum RandtriStatus randtri_sot_error(const struct RandtriEnsemble *ens,
                                     uintptr_t n,
                                     const struct RandtriGrid *u,
                                     uint64_t master_seed,
                                     uint64_t trial,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RANDTRI_H */
