#ifndef ADAPTEST_H
#define ADAPTEST_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AdaptestStatus {
  ADAPTEST_STATUS_OK = 0,
  ADAPTEST_STATUS_NULL_POINTER = 1,
  ADAPTEST_STATUS_INVALID_UTF8 = 2,
  // A document did not parse or failed validation.
  ADAPTEST_STATUS_INVALID_INPUT = 3,
  // A panic was caught at the boundary.
  ADAPTEST_STATUS_INTERNAL = 4,
} AdaptestStatus;

typedef struct AdaptestModel AdaptestModel;

typedef struct AdaptestRepository AdaptestRepository;

typedef struct AdaptestSession AdaptestSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until the
// next call on the same thread; do not free.
const char *adaptest_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void adaptest_string_free(char *s);

// Library version, static storage.
const char *adaptest_version(void);

// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum AdaptestStatus adaptest_model_load(const char *json, struct AdaptestModel **out);

// # Safety
// `model` must come from `adaptest_model_load` and not be used afterwards.
void adaptest_model_free(struct AdaptestModel *model);

// Writes the model's version string to `out`.
//
// # Safety
// Pointers must be valid.
enum AdaptestStatus adaptest_model_version(const struct AdaptestModel *model, char **out);

// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum AdaptestStatus adaptest_repository_load(const char *json, struct AdaptestRepository **out);

// # Safety
// `repo` must come from `adaptest_repository_load` and not be used afterwards.
void adaptest_repository_free(struct AdaptestRepository *repo);

// Starts a simulated session. The session keeps the model alive on its own.
//
// # Safety
// Pointers must be valid.
enum AdaptestStatus adaptest_session_start(const struct AdaptestModel *model,
                                           uint64_t seed,
                                           struct AdaptestSession **out);

// # Safety
// `session` must come from `adaptest_session_start` and not be used afterwards.
void adaptest_session_free(struct AdaptestSession *session);

// Current screen view as JSON.
//
// # Safety
// Pointers must be valid.
enum AdaptestStatus adaptest_session_observe(const struct AdaptestSession *session, char **out);

// Performs `{"verb": ..., "target": ..., "value": ...}` and writes the
// outcome as JSON. A rejected action is an outcome, not an error.
//
// # Safety
// Pointers must be valid.
enum AdaptestStatus adaptest_session_perform(struct AdaptestSession *session,
                                             const char *action_json,
                                             char **out);

// Runs a suite and writes the JSON report.
//
// `scripts_json` is an array of script texts. `config_json` and `kb_json`
// may be null for the defaults. With `fixed_clock` non-zero the report
// carries a constant timestamp.
//
// # Safety
// Pointers must be valid; the nullable ones may be null.
enum AdaptestStatus adaptest_run_suite(const struct AdaptestModel *model,
                                       const struct AdaptestRepository *repo,
                                       const char *scripts_json,
                                       const char *config_json,
                                       const char *kb_json,
                                       uint64_t seed,
                                       int32_t fixed_clock,
                                       char **out);

// Validates one script; writes the issues as a JSON array. `model` may be null.
//
// # Safety
// Pointers must be valid; `model` may be null.
enum AdaptestStatus adaptest_validate_script(const char *script,
                                             const struct AdaptestRepository *repo,
                                             const struct AdaptestModel *model,
                                             char **out);

// Differences between two model versions as JSON.
//
// # Safety
// Pointers must be valid.
enum AdaptestStatus adaptest_diff_models(const struct AdaptestModel *old,
                                         const struct AdaptestModel *new_,
                                         char **out);

// Edit distance in characters.
//
// # Safety
// `a` and `b` must be NUL-terminated strings; `out` must be writable.
enum AdaptestStatus adaptest_levenshtein(const char *a, const char *b, size_t *out);

// `1 - distance / max length`, in [0, 1].
//
// # Safety
// `a` and `b` must be NUL-terminated strings; `out` must be writable.
enum AdaptestStatus adaptest_string_similarity(const char *a,
                                               const char *b,
                                               int32_t case_insensitive,
                                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADAPTEST_H */
