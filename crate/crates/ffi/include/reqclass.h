#ifndef REQCLASS_H
#define REQCLASS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum ReqclassStatus {
  REQCLASS_STATUS_OK = 0,
  // A required pointer argument was null.
  REQCLASS_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  REQCLASS_STATUS_INVALID_UTF8 = 2,
  REQCLASS_STATUS_IO = 3,
  // Malformed CSV or JSON input.
  REQCLASS_STATUS_PARSE = 4,
  // Well-formed input that violates a data contract (unknown label,
  // empty text, empty dataset, class too small for the fold count).
  REQCLASS_STATUS_DATA = 5,
  // Invalid configuration or hyperparameters.
  REQCLASS_STATUS_CONFIG = 6,
  // The model cannot perform the request or training failed.
  REQCLASS_STATUS_MODEL = 7,
  // A panic was caught; the library state is still usable.
  REQCLASS_STATUS_INTERNAL = 8,
} ReqclassStatus;

// Loaded requirements corpus.
typedef struct ReqclassDataset ReqclassDataset;

// Trained classifier together with its vocabulary.
typedef struct ReqclassModel ReqclassModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static string; never free it.
const char *reqclass_version(void);

// Human-readable message of the last error on this thread, or null when
// the last call succeeded. Valid until the next call into the library on
// the same thread; do not free.
const char *reqclass_last_error_message(void);

// Stable identifier (for example `E_CLASS_TOO_SMALL`) of the last error on
// this thread, or null. Same lifetime rules as the message.
const char *reqclass_last_error_code(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` is null or a pointer obtained from an `out` string parameter of this
// library that has not been freed yet.
void reqclass_string_free(char *s);

// Loads a labelled requirements CSV. The header is auto-detected
// (`id,text,label` or the PROMISE_exp layout).
//
// # Safety
// `path` is a NUL-terminated string; `out` is a writable pointer.
enum ReqclassStatus reqclass_dataset_load_csv(const char *path, struct ReqclassDataset **out);

// Number of records; 0 for a null handle.
//
// # Safety
// `ds` is null or a live dataset handle.
size_t reqclass_dataset_len(const struct ReqclassDataset *ds);

// Class counts as a JSON object keyed by label code.
//
// # Safety
// `ds` is a live dataset handle; `out` is writable.
enum ReqclassStatus reqclass_dataset_distribution_json(const struct ReqclassDataset *ds,
                                                       char **out);

// # Safety
// `ds` is null or a live dataset handle, which becomes invalid.
void reqclass_dataset_free(struct ReqclassDataset *ds);

// Cross-validates per `config_json` (an experiment config object; null for
// defaults) and returns the versioned JSON report.
//
// # Safety
// `ds` is a live dataset handle; `config_json` is null or a NUL-terminated
// string; `out` is writable.
enum ReqclassStatus reqclass_run_cv_json(const struct ReqclassDataset *ds,
                                         const char *config_json,
                                         char **out);

// Trains `model_id` (`lr`, `svm`, `nb`, `knn3`, `knn5`, `knn7`, `dt`) on the
// whole dataset using the vectorizer and resampling settings of
// `config_json` (null for defaults).
//
// # Safety
// `ds` is a live dataset handle; string arguments are NUL-terminated or,
// for `config_json`, null; `out` is writable.
enum ReqclassStatus reqclass_train_final(const struct ReqclassDataset *ds,
                                         const char *config_json,
                                         const char *model_id,
                                         struct ReqclassModel **out);

// Parses a model artifact produced by `reqclass_model_to_json` or the CLI.
//
// # Safety
// `json` is NUL-terminated; `out` is writable.
enum ReqclassStatus reqclass_model_from_json(const char *json, struct ReqclassModel **out);

// Serializes a model artifact to JSON.
//
// # Safety
// `model` is a live model handle; `out` is writable.
enum ReqclassStatus reqclass_model_to_json(const struct ReqclassModel *model, char **out);

// Predicts the label code (for example `SE`) of one requirement text.
//
// # Safety
// `model` is a live model handle; `text` is NUL-terminated; `out` is
// writable.
enum ReqclassStatus reqclass_model_predict(const struct ReqclassModel *model,
                                           const char *text,
                                           char **out);

// # Safety
// `model` is null or a live model handle, which becomes invalid.
void reqclass_model_free(struct ReqclassModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REQCLASS_H */
