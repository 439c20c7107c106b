/* C ABI for the crispedge edge-detection toolkit. */

#ifndef CRISPEDGE_H
#define CRISPEDGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum CedStatus {
  CED_STATUS_OK = 0,
  CED_STATUS_NULL_POINTER = 1,
  CED_STATUS_INVALID_ARGUMENT = 2,
  CED_STATUS_IO = 3,
  CED_STATUS_INTERNAL = 4,
} CedStatus;

/**
 * Opaque network handle: architecture plus its parameter set.
 */
typedef struct CedNet CedNet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ced_last_error(void);

/**
 * Library version as a static string.
 */
const char *ced_version(void);

/**
 * Create a network from a TOML run configuration (NULL for defaults).
 * Weights are freshly initialized from `seed`; load a checkpoint to reuse
 * trained parameters. On success `*out` owns the handle.
 *
 * # Safety
 * `config_toml` must be NULL or a valid NUL-terminated string; `out` must
 * be a valid pointer.
 */
enum CedStatus ced_net_create(const char *config_toml, uint64_t seed, struct CedNet **out);

/**
 * Load checkpoint weights into an existing handle. The checkpoint must
 * match the handle's architecture.
 *
 * # Safety
 * `net` must be a live handle from `ced_net_create`; `path` a valid
 * NUL-terminated string.
 */
enum CedStatus ced_net_load_checkpoint(struct CedNet *net, const char *path);

/**
 * Eval-mode forward pass. `image` holds `3*h*w` CHW values in `[0,1]`;
 * `out` receives `h*w` edge probabilities.
 *
 * # Safety
 * `net` must be live; `image` and `out` must point to buffers of at least
 * `3*h*w` and `h*w` doubles.
 */
enum CedStatus ced_net_predict(struct CedNet *net,
                               const double *image,
                               uintptr_t h,
                               uintptr_t w,
                               double *out);

/**
 * Release a handle. NULL is a no-op.
 *
 * # Safety
 * `net` must be NULL or a handle not freed before.
 */
void ced_net_free(struct CedNet *net);

/**
 * Classical Canny on a grayscale image (`h*w` doubles in `[0,1]`).
 * `out` receives `h*w` bytes, 1 for edge pixels.
 *
 * # Safety
 * `image` and `out` must point to buffers of `h*w` doubles / bytes.
 */
enum CedStatus ced_canny(const double *image,
                         uintptr_t h,
                         uintptr_t w,
                         double sigma,
                         double low,
                         double high,
                         uint8_t *out);

/**
 * Single-image C-Eval ODS of a probability map against one binary ground
 * truth (`gt`: `h*w` bytes, nonzero = edge) over the standard 99-threshold
 * sweep. `tol_px <= 0` selects the default 0.0075 x diagonal tolerance.
 *
 * # Safety
 * `pred` must hold `h*w` doubles, `gt` `h*w` bytes, `ods_out` one double.
 */
enum CedStatus ced_c_eval_ods(const double *pred,
                              const uint8_t *gt,
                              uintptr_t h,
                              uintptr_t w,
                              double tol_px,
                              double *ods_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRISPEDGE_H */
