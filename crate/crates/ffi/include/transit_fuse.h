#ifndef TRANSIT_FUSE_H
#define TRANSIT_FUSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes.
 */
typedef enum TfStatus {
  TF_STATUS_OK = 0,
  TF_STATUS_NULL_POINTER = 1,
  TF_STATUS_INVALID_INPUT = 2,
  TF_STATUS_INVARIANT_VIOLATION = 3,
  TF_STATUS_PANIC = 4,
} TfStatus;

/*
 Opaque fitted forest.
 */
typedef struct TfForest TfForest;

/*
 Pairwise correlation.
 */
typedef struct TfCorrelation {
  double coefficient;
  double p_value;
} TfCorrelation;

/*
 Forest settings. `max_depth` and `mtry` of 0 mean "unset".
 */
typedef struct TfForestParams {
  uintptr_t n_trees;
  uintptr_t max_depth;
  uintptr_t min_leaf;
  uintptr_t mtry;
  bool bootstrap;
} TfForestParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. Valid until the
 next call into this library on the same thread.
 */
const char *tf_last_error(void);

/*
 Great-circle distance in kilometres.

 # Safety
 `out` must be a valid pointer.
 */
enum TfStatus tf_haversine_km(double lat1, double lon1, double lat2, double lon2, double *out);

/*
 Gini coefficient of non-negative values.

 # Safety
 `values` must point to `len` doubles; `out` must be valid.
 */
enum TfStatus tf_gini(const double *values, uintptr_t len, double *out);

/*
 Spearman rank correlation with average ranks for ties.

 # Safety
 `x` and `y` must point to `len` doubles; `out` must be valid.
 */
enum TfStatus tf_spearman(const double *x,
                          const double *y,
                          uintptr_t len,
                          struct TfCorrelation *out);

/*
 Pearson correlation.

 # Safety
 `x` and `y` must point to `len` doubles; `out` must be valid.
 */
enum TfStatus tf_pearson(const double *x,
                         const double *y,
                         uintptr_t len,
                         struct TfCorrelation *out);

/*
 Library defaults.
 */
struct TfForestParams tf_forest_params_default(void);

/*
 Fits a regression forest. On success `*out` owns a handle to release
 with [`tf_forest_free`].

 # Safety
 `x` must point to `n_rows * n_cols` doubles, `y` to `n_rows`; `params`
 and `out` must be valid.
 */
enum TfStatus tf_forest_fit(const double *x,
                            const double *y,
                            uintptr_t n_rows,
                            uintptr_t n_cols,
                            const struct TfForestParams *params,
                            uint64_t seed,
                            struct TfForest **out);

/*
 Predicts `n_rows` rows into `out`.

 # Safety
 `forest` must come from [`tf_forest_fit`]; `x` must point to
 `n_rows * n_cols` doubles and `out` to `n_rows` writable doubles.
 */
enum TfStatus tf_forest_predict(const struct TfForest *forest,
                                const double *x,
                                uintptr_t n_rows,
                                uintptr_t n_cols,
                                double *out);

/*
 Out-of-bag R² on the training data the forest was fitted to.

 # Safety
 As for [`tf_forest_fit`]; `out` must be valid.
 */
enum TfStatus tf_forest_oob_r_squared(const struct TfForest *forest,
                                      const double *x,
                                      const double *y,
                                      uintptr_t n_rows,
                                      uintptr_t n_cols,
                                      double *out);

/*
 Releases a forest. Null is a no-op.

 # Safety
 `forest` must come from [`tf_forest_fit`] and not be used afterwards.
 */
void tf_forest_free(struct TfForest *forest);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRANSIT_FUSE_H */
