#ifndef ACTREF_H
#define ACTREF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Error codes returned by every fallible function.
 */
#define ACTREF_OK 0

#define ACTREF_ERR_NULL_ARGUMENT 1

#define ACTREF_ERR_INVALID_UTF8 2

#define ACTREF_ERR_BAD_CONFIG 3

#define ACTREF_ERR_BAD_INPUT 4

/**
 * Opaque detector configuration handle.
 */
typedef struct ActrefConfig ActrefConfig;

/**
 * Opaque detection result handle.
 */
typedef struct ActrefResult ActrefResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the library as a static NUL-terminated string.
 */
const char *actref_version(void);

/**
 * Static message for an error code; never NULL.
 */
const char *actref_error_message(int code);

/**
 * New configuration with default thresholds. Free with
 * `actref_config_free`.
 */
struct ActrefConfig *actref_config_new(void);

/**
 * Set one threshold by its key (same keys as the config file,
 * e.g. "file_pair_floor", "source_suffix").
 *
 * # Safety
 * `key` and `value` must be NUL-terminated strings or NULL.
 */
int actref_config_set(struct ActrefConfig *cfg, const char *key, const char *value);

/**
 * Free a configuration handle. NULL is ignored.
 *
 * # Safety
 * `cfg` must come from `actref_config_new` and not be freed twice.
 */
void actref_config_free(struct ActrefConfig *cfg);

/**
 * Detect refactorings between one before and one after version of a file.
 * Writes a result handle to `out_result` on success.
 *
 * # Safety
 * All pointers must be valid; string arguments must be NUL-terminated.
 */
int actref_detect_pair(const struct ActrefConfig *cfg,
                       const char *before_path,
                       const char *before_source,
                       const char *after_path,
                       const char *after_source,
                       struct ActrefResult **out_result);

/**
 * Detect refactorings for a whole commit described as JSON:
 * `{"commit": "...", "before": [{"path": "...", "content": "..."}],
 *   "after": [...]}`.
 *
 * # Safety
 * `payload` must be a NUL-terminated string; `out_result` must be valid.
 */
int actref_detect_json(const struct ActrefConfig *cfg,
                       const char *payload,
                       struct ActrefResult **out_result);

/**
 * Number of detected instances in a result.
 *
 * # Safety
 * `result` must come from a detect call.
 */
uintptr_t actref_result_count(const struct ActrefResult *result);

/**
 * JSON array of the detected instances. The pointer stays valid until the
 * result is freed; never NULL for a valid handle.
 *
 * # Safety
 * `result` must come from a detect call.
 */
const char *actref_result_json(const struct ActrefResult *result);

/**
 * Free a result handle. NULL is ignored.
 *
 * # Safety
 * `result` must come from a detect call and not be freed twice.
 */
void actref_result_free(struct ActrefResult *result);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ACTREF_H */
