#ifndef DEFAKE_H
#define DEFAKE_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum DefakeStatus {
  DEFAKE_STATUS_OK = 0,
  /**
   * A NULL pointer, bad length or malformed string argument.
   */
  DEFAKE_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Configuration rejected (bad JSON, out-of-range settings).
   */
  DEFAKE_STATUS_CONFIG = 2,
  /**
   * Dataset missing, malformed or inconsistent.
   */
  DEFAKE_STATUS_DATA = 3,
  /**
   * Non-finite values or a dimension mismatch during computation.
   */
  DEFAKE_STATUS_NUMERIC = 4,
  DEFAKE_STATUS_IO = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  DEFAKE_STATUS_PANIC = 6,
} DefakeStatus;

/**
 * A loaded or generated dual-layer news/user graph.
 */
typedef struct DefakeDataset DefakeDataset;

/**
 * A model being trained on one dataset, with its sampling coefficients.
 */
typedef struct DefakeTrainer DefakeTrainer;

/**
 * Mean losses of one training epoch.
 */
typedef struct DefakeEpochStats {
  /**
   * Zero-based index of the completed epoch.
   */
  size_t epoch;
  size_t minibatches;
  double mean_news_loss;
  double mean_user_loss;
  double mean_loss;
} DefakeEpochStats;

/**
 * Binary classification metrics with fake (1) as the positive class.
 */
typedef struct DefakeMetrics {
  double accuracy;
  double precision;
  double recall;
  double f1;
  size_t tp;
  size_t fp;
  size_t tn;
  size_t fn_;
  /**
   * Nonzero when nothing was predicted fake, so precision is reported as 0.
   */
  uint8_t precision_undefined;
  /**
   * Nonzero when nothing is truly fake, so recall is reported as 0.
   */
  uint8_t recall_undefined;
} DefakeMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *defake_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *defake_last_error_message(void);

/**
 * Releases a string returned by the library.
 */
void defake_string_free(char *s);

/**
 * Loads a dataset bundle directory.
 */
enum DefakeStatus defake_dataset_load(const char *dir, struct DefakeDataset **out_dataset);

/**
 * Generates a synthetic dataset from a JSON generator config (NULL for
 * the defaults).
 */
enum DefakeStatus defake_dataset_synthesize(const char *config_json,
                                            struct DefakeDataset **out_dataset);

/**
 * Writes the dataset as a bundle directory.
 */
enum DefakeStatus defake_dataset_write(const struct DefakeDataset *dataset, const char *dir);

/**
 * Number of news nodes (sources and cascade posts); 0 for NULL.
 */
size_t defake_dataset_news_count(const struct DefakeDataset *dataset);

/**
 * Number of users; 0 for NULL.
 */
size_t defake_dataset_user_count(const struct DefakeDataset *dataset);

/**
 * Number of labeled source news; 0 for NULL.
 */
size_t defake_dataset_source_count(const struct DefakeDataset *dataset);

/**
 * Copies the ids and labels (0 real, 1 fake) of the labeled source news.
 * `len` must equal `defake_dataset_source_count`.
 */
enum DefakeStatus defake_dataset_copy_sources(const struct DefakeDataset *dataset,
                                              size_t *out_ids,
                                              uint8_t *out_labels,
                                              size_t len);

void defake_dataset_free(struct DefakeDataset *dataset);

/**
 * Creates a trainer from a JSON training config (NULL for the defaults)
 * and estimates the sampling coefficients. Only cascades rooted at the
 * given source ids contribute labels; `train_sources = NULL` with
 * `n_train = 0` trains on every labeled news node.
 */
enum DefakeStatus defake_trainer_new(const struct DefakeDataset *dataset,
                                     const char *config_json,
                                     const size_t *train_sources,
                                     size_t n_train,
                                     struct DefakeTrainer **out_trainer);

/**
 * Runs one epoch of minibatch training. `out_stats` may be NULL.
 */
enum DefakeStatus defake_trainer_train_epoch(struct DefakeTrainer *trainer,
                                             struct DefakeEpochStats *out_stats);

/**
 * Writes the fake-class probability of every news node. `len` must equal
 * `defake_dataset_news_count`.
 */
enum DefakeStatus defake_trainer_predict(const struct DefakeTrainer *trainer,
                                         double *out_prob_fake,
                                         size_t len);

/**
 * Saves parameters, optimizer state and loss history as a checkpoint file.
 */
enum DefakeStatus defake_trainer_save(const struct DefakeTrainer *trainer, const char *path);

void defake_trainer_free(struct DefakeTrainer *trainer);

/**
 * Runs a k-fold experiment and returns the report as JSON in
 * `out_report_json` (free it with `defake_string_free`).
 */
enum DefakeStatus defake_experiment_run(const struct DefakeDataset *dataset,
                                        const char *config_json,
                                        const char *split_json,
                                        char **out_report_json);

/**
 * Metrics of `predicted` against `truth`, both `n` labels of 0 or 1.
 */
enum DefakeStatus defake_compute_metrics(const uint8_t *predicted,
                                         const uint8_t *truth,
                                         size_t n,
                                         struct DefakeMetrics *out_metrics);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEFAKE_H */
