#ifndef CQA_H
#define CQA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CqaStatus {
  CQA_STATUS_OK = 0,
  CQA_STATUS_NULL_ARGUMENT = 1,
  CQA_STATUS_INVALID_ARGUMENT = 2,
  CQA_STATUS_IO = 3,
  CQA_STATUS_DATA = 4,
  CQA_STATUS_CONFIG = 5,
  CQA_STATUS_DIMENSION = 6,
  CQA_STATUS_PANIC = 7,
} CqaStatus;

/**
 * A parsed dump: threads, users and labelled instances.
 */
typedef struct CqaDataset CqaDataset;

/**
 * Feature rows with their labels and column names.
 */
typedef struct CqaFeatureTable CqaFeatureTable;

/**
 * A trained boosted-tree classifier.
 */
typedef struct CqaModel CqaModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cqa_version(void);

/**
 * Copies the last error raised on this thread into `buf` and returns its
 * full length. Pass a null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or point to at least `len` writable bytes.
 */
size_t cqa_last_error_message(char *buf, size_t len);

/**
 * Area under the ROC curve of `scores` against 0/1 `labels`.
 *
 * # Safety
 * `scores` and `labels` must point to `n` doubles; `out` to one.
 */
enum CqaStatus cqa_auc(const double *scores, const double *labels, size_t n, double *out);

/**
 * Flesch-Kincaid grade from average words per sentence and syllables per word.
 */
double cqa_flesch_kincaid(double words_per_sentence, double syllables_per_word);

/**
 * Parses `Posts.xml`, `Users.xml`, `Comments.xml` (and `Badges.xml` if
 * present) from `dump_dir`.
 *
 * # Safety
 * `dump_dir` must be a NUL-terminated string; `out` a valid pointer.
 */
enum CqaStatus cqa_dataset_read_dump(const char *dump_dir, struct CqaDataset **out);

/**
 * Loads a dataset written by `cqa ingest` (the workspace `dataset/` directory).
 *
 * # Safety
 * As for [`cqa_dataset_read_dump`].
 */
enum CqaStatus cqa_dataset_load(const char *dataset_dir, struct CqaDataset **out);

/**
 * Number of kept threads; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t cqa_dataset_thread_count(const struct CqaDataset *ds);

/**
 * Number of labelled (question, answer) instances; 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t cqa_dataset_instance_count(const struct CqaDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void cqa_dataset_free(struct CqaDataset *ds);

/**
 * Builds the S, A, Q and UR feature groups (topic features need trained
 * topic models and are only produced by the pipeline).
 *
 * # Safety
 * `ds` must be a live dataset handle; `out` a valid pointer.
 */
enum CqaStatus cqa_features_build(const struct CqaDataset *ds, struct CqaFeatureTable **out);

/**
 * Reads a feature CSV written by `cqa features`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum CqaStatus cqa_features_read_csv(const char *path, struct CqaFeatureTable **out);

/**
 * Restricts `table` to the comma separated `groups` (e.g. "S,A,UR"),
 * with or without percent-rank columns.
 *
 * # Safety
 * `table` must be a live handle, `groups` a NUL-terminated string, `out` valid.
 */
enum CqaStatus cqa_features_select(const struct CqaFeatureTable *table,
                                   const char *groups,
                                   bool percent_rank,
                                   struct CqaFeatureTable **out);

/**
 * # Safety
 * `table` must be null or a live handle.
 */
size_t cqa_features_row_count(const struct CqaFeatureTable *table);

/**
 * # Safety
 * `table` must be null or a live handle.
 */
size_t cqa_features_column_count(const struct CqaFeatureTable *table);

/**
 * Copies the name of column `j` into `buf` and returns its full length,
 * or 0 when `j` is out of range.
 *
 * # Safety
 * `table` must be null or a live handle; `buf` null or `len` writable bytes.
 */
size_t cqa_features_column_name(const struct CqaFeatureTable *table,
                                size_t j,
                                char *buf,
                                size_t len);

/**
 * Copies the 0/1 labels into `out`, which must hold exactly the row count.
 *
 * # Safety
 * `table` must be a live handle; `out` must point to `len` doubles.
 */
enum CqaStatus cqa_features_labels(const struct CqaFeatureTable *table, double *out, size_t len);

/**
 * Copies row `i` into `out`; missing values are NaN.
 *
 * # Safety
 * `table` must be a live handle; `out` must point to `len` doubles.
 */
enum CqaStatus cqa_features_row(const struct CqaFeatureTable *table,
                                size_t i,
                                double *out,
                                size_t len);

/**
 * # Safety
 * `table` must be null or a handle not yet freed.
 */
void cqa_features_free(struct CqaFeatureTable *table);

/**
 * Trains boosted trees on every column of `table`. Zero `n_trees` or
 * `learning_rate` keep the library defaults.
 *
 * # Safety
 * `table` must be a live handle; `out` a valid pointer.
 */
enum CqaStatus cqa_model_train(const struct CqaFeatureTable *table,
                               size_t n_trees,
                               double learning_rate,
                               uint64_t seed,
                               struct CqaModel **out);

/**
 * Loads a JSON model, e.g. `runs/<run-id>/model.json`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum CqaStatus cqa_model_load(const char *path, struct CqaModel **out);

/**
 * # Safety
 * `model` must be a live handle; `path` a NUL-terminated string.
 */
enum CqaStatus cqa_model_save(const struct CqaModel *model, const char *path);

/**
 * # Safety
 * `model` must be null or a live handle.
 */
size_t cqa_model_feature_count(const struct CqaModel *model);

/**
 * Probability that the answer described by `row` is accepted. NaN marks
 * a missing value.
 *
 * # Safety
 * `model` must be a live handle; `row` must point to `len` doubles; `out` to one.
 */
enum CqaStatus cqa_model_predict(const struct CqaModel *model,
                                 const double *row,
                                 size_t len,
                                 double *out);

/**
 * Scores every row of `table`. The table's columns must match the model's
 * feature names in order.
 *
 * # Safety
 * `model` and `table` must be live handles; `out` must point to `len` doubles.
 */
enum CqaStatus cqa_model_predict_table(const struct CqaModel *model,
                                       const struct CqaFeatureTable *table,
                                       double *out,
                                       size_t len);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void cqa_model_free(struct CqaModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CQA_H */
