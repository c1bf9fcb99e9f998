#ifndef MRC_H
#define MRC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum MrcFeatures {
  MRC_FEATURES_IDENTITY = 0,
  MRC_FEATURES_STANDARDIZE = 1,
  MRC_FEATURES_RFF = 2,
} MrcFeatures;

typedef enum MrcMode {
  MRC_MODE_AUTO = 0,
  MRC_MODE_CONSTRAINTS_ONLY = 1,
  MRC_MODE_COMBINED = 2,
} MrcMode;

typedef enum MrcStatus {
  MRC_STATUS_OK = 0,
  MRC_STATUS_NULL_POINTER = 1,
  MRC_STATUS_INVALID_ARGUMENT = 2,
  MRC_STATUS_IO = 3,
  MRC_STATUS_PARSE = 4,
  MRC_STATUS_SHAPE = 5,
  MRC_STATUS_CONFIG = 6,
  MRC_STATUS_NUMERICAL = 7,
  MRC_STATUS_UNBOUNDED = 8,
  MRC_STATUS_TIME_LIMIT = 9,
  MRC_STATUS_PANIC = 10,
} MrcStatus;

/**
 * Opaque dataset handle.
 */
typedef struct MrcDataset MrcDataset;

/**
 * Opaque model handle.
 */
typedef struct MrcModel MrcModel;

typedef struct MrcTrainOptions {
  double lambda0;
  double eps1;
  double eps2;
  size_t n_max;
  size_t m_max;
  size_t k_max;
  enum MrcMode mode;
  enum MrcFeatures features;
  size_t rff_dim;
  /**
   * Nonpositive selects the median-distance bandwidth.
   */
  double rff_sigma;
  uint64_t seed;
  /**
   * Nonpositive disables the limit.
   */
  double time_limit_seconds;
} MrcTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code.
 */
const char *mrc_status_str(enum MrcStatus status);

/**
 * Message of the last failure on this thread, or "" if none. Valid until
 * the next failing call on the same thread.
 */
const char *mrc_last_error_message(void);

struct MrcTrainOptions mrc_train_options_default(void);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MrcStatus mrc_dataset_load_libsvm(const char *path, struct MrcDataset **out);

/**
 * `label_column` is a header name or a 0-based index; null means "label".
 *
 * # Safety
 * `path` and a non-null `label_column` must be NUL-terminated strings and
 * `out` a valid pointer.
 */
enum MrcStatus mrc_dataset_load_csv(const char *path,
                                    const char *label_column,
                                    struct MrcDataset **out);

/**
 * Builds a dataset from a row-major `n × d` matrix and 0-based labels
 * below `n_classes`. Classes are named "1".."n_classes".
 *
 * # Safety
 * `x` must point to `n * d` doubles, `labels` to `n` values and `out` must
 * be a valid pointer.
 */
enum MrcStatus mrc_dataset_from_dense(const double *x,
                                      size_t n,
                                      size_t d,
                                      const uint32_t *labels,
                                      size_t n_classes,
                                      struct MrcDataset **out);

/**
 * # Safety
 * `ds` must be null or a handle from this library not yet freed.
 */
void mrc_dataset_free(struct MrcDataset *ds);

/**
 * Returns 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t mrc_dataset_n_samples(const struct MrcDataset *ds);

/**
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t mrc_dataset_n_features(const struct MrcDataset *ds);

/**
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t mrc_dataset_n_classes(const struct MrcDataset *ds);

/**
 * Trains a model on `ds`. A null `options` uses the defaults.
 *
 * # Safety
 * `ds` must be a live dataset handle, `options` null or valid, and `out` a
 * valid pointer.
 */
enum MrcStatus mrc_train(const struct MrcDataset *ds,
                         const struct MrcTrainOptions *options,
                         struct MrcModel **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MrcStatus mrc_model_load(const char *path, struct MrcModel **out);

/**
 * # Safety
 * `model` must be a live model handle and `path` a NUL-terminated string.
 */
enum MrcStatus mrc_model_save(const struct MrcModel *model, const char *path);

/**
 * # Safety
 * `model` must be null or a handle from this library not yet freed.
 */
void mrc_model_free(struct MrcModel *model);

/**
 * Predicts the 0-based class of one raw input of length `len`.
 *
 * # Safety
 * `model` must be a live model handle, `x` must point to `len` doubles and
 * `out_label` must be valid.
 */
enum MrcStatus mrc_model_predict(const struct MrcModel *model,
                                 const double *x,
                                 size_t len,
                                 size_t *out_label);

/**
 * Name of class `label`, or null if out of range. Owned by the model.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
const char *mrc_model_label_name(const struct MrcModel *model, size_t label);

/**
 * Worst-case error probability R of the model; NaN for a null handle.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
double mrc_model_worst_case_risk(const struct MrcModel *model);

/**
 * # Safety
 * `model` must be null or a live model handle.
 */
size_t mrc_model_n_classes(const struct MrcModel *model);

/**
 * Length of the raw inputs the model accepts.
 *
 * # Safety
 * `model` must be null or a live model handle.
 */
size_t mrc_model_input_dim(const struct MrcModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MRC_H */
