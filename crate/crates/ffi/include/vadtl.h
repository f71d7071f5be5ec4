#ifndef VADTL_H
#define VADTL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every call.
 */
typedef enum VadtlStatus {
  VADTL_STATUS_OK = 0,
  VADTL_STATUS_NULL_POINTER = 1,
  VADTL_STATUS_INVALID_ARGUMENT = 2,
  VADTL_STATUS_IO = 3,
  VADTL_STATUS_FORMAT = 4,
  VADTL_STATUS_DIMENSION_MISMATCH = 5,
  VADTL_STATUS_INSUFFICIENT_DATA = 6,
  /*
   The output buffer is too small; the required size was still written.
   */
  VADTL_STATUS_BUFFER_TOO_SMALL = 7,
  VADTL_STATUS_PANIC = 8,
} VadtlStatus;

/*
 A trained network.
 */
typedef struct VadtlModel VadtlModel;

/*
 Per-dimension min-max scaling fitted on a corpus.
 */
typedef struct VadtlNormalizer VadtlNormalizer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the calling thread's most recent failure, or NULL.
 The pointer stays valid until the next call on the same thread.
 */
const char *vadtl_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *vadtl_version(void);

/*
 Length of one feature row.
 */
uintptr_t vadtl_feature_dim(void);

/*
 Number of analysis frames in `n_samples` samples at `sample_rate`.
 */
uintptr_t vadtl_frame_count(uintptr_t n_samples, uint32_t sample_rate);

/*
 Extracts the feature matrix of an utterance into `out` (row-major,
 `capacity` doubles). `*rows_out` receives the frame count. Passing a NULL
 `out` only computes `*rows_out`.

 # Safety
 `samples` must point to `n_samples` doubles, `out` (if non-NULL) to
 `capacity` writable doubles and `rows_out` to a writable `size_t`.
 */
enum VadtlStatus vadtl_extract_features(const double *samples,
                                        uintptr_t n_samples,
                                        uint32_t sample_rate,
                                        double *out,
                                        uintptr_t capacity,
                                        uintptr_t *rows_out);

/*
 Loads a model file written by `vadtl run`.

 # Safety
 `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum VadtlStatus vadtl_model_load(const char *path, struct VadtlModel **out);

/*
 Releases a model. NULL is ignored.

 # Safety
 `model` must come from [`vadtl_model_load`] and not be used afterwards.
 */
void vadtl_model_free(struct VadtlModel *model);

/*
 Input dimension of the model, 0 for NULL.

 # Safety
 `model` must be NULL or a live handle.
 */
uintptr_t vadtl_model_input_dim(const struct VadtlModel *model);

/*
 Number of hidden layers, 0 for NULL.

 # Safety
 `model` must be NULL or a live handle.
 */
uintptr_t vadtl_model_depth(const struct VadtlModel *model);

/*
 Speech probabilities (and optionally 0/1 labels) for `rows` normalized
 feature rows of width `dim`.

 # Safety
 `features` must point to `rows * dim` doubles, `probabilities` to `rows`
 writable doubles and `labels` to NULL or `rows` writable bytes.
 */
enum VadtlStatus vadtl_model_predict(const struct VadtlModel *model,
                                     const double *features,
                                     uintptr_t rows,
                                     uintptr_t dim,
                                     double *probabilities,
                                     uint8_t *labels);

/*
 Loads a normalizer CSV.

 # Safety
 `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum VadtlStatus vadtl_normalizer_load(const char *path, struct VadtlNormalizer **out);

/*
 Releases a normalizer. NULL is ignored.

 # Safety
 `norm` must come from [`vadtl_normalizer_load`] and not be used afterwards.
 */
void vadtl_normalizer_free(struct VadtlNormalizer *norm);

/*
 Scales `rows` rows of width `dim` in place.

 # Safety
 `data` must point to `rows * dim` writable doubles.
 */
enum VadtlStatus vadtl_normalizer_apply(const struct VadtlNormalizer *norm,
                                        double *data,
                                        uintptr_t rows,
                                        uintptr_t dim);

/*
 Frame decisions for raw audio: extraction, scaling with `norm` and
 prediction with `model`. `*frames_out` receives the frame count; the
 labels (0/1) go to `labels`, which holds `capacity` bytes. Passing a
 NULL `labels` only computes `*frames_out`.

 # Safety
 Pointers must satisfy the same rules as in the functions above.
 */
enum VadtlStatus vadtl_detect(const struct VadtlModel *model,
                              const struct VadtlNormalizer *norm,
                              const double *samples,
                              uintptr_t n_samples,
                              uint32_t sample_rate,
                              uint8_t *labels,
                              uintptr_t capacity,
                              uintptr_t *frames_out);

/*
 Similarity of two corpora from their normalized feature rows, computed
 on the rows' centroids.

 # Safety
 `a` must point to `rows_a * dim` doubles, `b` to `rows_b * dim` and `out`
 to a writable double.
 */
enum VadtlStatus vadtl_similarity(const double *a,
                                  uintptr_t rows_a,
                                  const double *b,
                                  uintptr_t rows_b,
                                  uintptr_t dim,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VADTL_H */
