#ifndef SENSORPEN_H
#define SENSORPEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum SpStatus {
  SP_STATUS_OK = 0,
  SP_STATUS_NULL_ARGUMENT = 1,
  SP_STATUS_INVALID_UTF8 = 2,
  SP_STATUS_INVALID_ARGUMENT = 3,
  SP_STATUS_IO = 4,
  SP_STATUS_NOT_FOUND = 5,
  SP_STATUS_DETECTOR = 6,
  SP_STATUS_PROMPT = 7,
  SP_STATUS_PANIC = 99,
} SpStatus;

/**
 * A list of peak positions, from a parsed response or a detector.
 */
typedef struct SpPeaks SpPeaks;

/**
 * A read-only replay store.
 */
typedef struct SpReplay SpReplay;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sp_version(void);

/**
 * Copies the calling thread's last error message into `buf`, truncating
 * to `len - 1` bytes. Returns the full message length, or 0 when there is
 * no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t sp_last_error_message(char *buf, size_t len);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a pointer previously handed out by this library.
 */
void sp_string_free(char *s);

/**
 * Extracts the R-peak list from a model response.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum SpStatus sp_rpeaks_parse(const char *text, struct SpPeaks **out);

/**
 * Runs a QRS detector (`pan_tompkins`, `hamilton`, `christov`, `tma` or
 * `swt`) over `n` samples taken at `fs` Hz.
 *
 * # Safety
 * `detector` must be a NUL-terminated string, `samples` must point to `n`
 * doubles, and `out` must be writable.
 */
enum SpStatus sp_detect(const char *detector,
                        const double *samples,
                        size_t n,
                        double fs,
                        struct SpPeaks **out);

/**
 * Number of peaks held by `peaks`; 0 for null.
 *
 * # Safety
 * `peaks` must be null or a live handle.
 */
size_t sp_peaks_len(const struct SpPeaks *peaks);

/**
 * True when the response had no well-formed R-peak list.
 *
 * # Safety
 * `peaks` must be null or a live handle.
 */
bool sp_peaks_hallucinated(const struct SpPeaks *peaks);

/**
 * Copies up to `cap` peaks into `dst`; returns how many were copied.
 *
 * # Safety
 * `peaks` must be a live handle and `dst` must have room for `cap` doubles.
 */
size_t sp_peaks_copy(const struct SpPeaks *peaks, double *dst, size_t cap);

/**
 * # Safety
 * `peaks` must be null or a handle not yet freed.
 */
void sp_peaks_free(struct SpPeaks *peaks);

/**
 * Beats per minute for `count` beats in `window_s` seconds.
 */
double sp_heart_rate(size_t count, double window_s);

/**
 * chrF of `hypothesis` against `reference`, in [0, 1].
 *
 * # Safety
 * Both strings must be NUL-terminated; `out` must be writable.
 */
enum SpStatus sp_chrf(const char *hypothesis, const char *reference, double *out);

/**
 * Renders a builtin ECG scheme (`ecg/description`, `ecg/procedure_1ex`,
 * ...) over `n` digitized samples. The prompt text goes to `out`.
 *
 * # Safety
 * `scheme` must be NUL-terminated, `values` must point to `n` integers,
 * and `out` must be writable.
 */
enum SpStatus sp_render_ecg_prompt(const char *scheme, const int64_t *values, size_t n, char **out);

/**
 * Opens an existing JSON Lines replay store.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum SpStatus sp_replay_open(const char *path, struct SpReplay **out);

/**
 * Number of distinct fingerprints in the store.
 *
 * # Safety
 * `store` must be null or a live handle.
 */
size_t sp_replay_len(const struct SpReplay *store);

/**
 * Looks up the response recorded for `fingerprint`. Returns
 * `SpStatus::NotFound` on a miss.
 *
 * # Safety
 * `store` must be a live handle, `fingerprint` NUL-terminated, and `out`
 * writable.
 */
enum SpStatus sp_replay_lookup(const struct SpReplay *store, const char *fingerprint, char **out);

/**
 * # Safety
 * `store` must be null or a handle not yet freed.
 */
void sp_replay_free(struct SpReplay *store);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SENSORPEN_H */
