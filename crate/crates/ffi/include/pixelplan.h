#ifndef PIXELPLAN_H
#define PIXELPLAN_H

/* Generated by cbindgen from pixelplan-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome.
 */
typedef enum PpStatus {
  PP_STATUS_OK = 0,
  PP_STATUS_NULL_POINTER = 1,
  PP_STATUS_INVALID_ARGUMENT = 2,
  PP_STATUS_RUNTIME_ERROR = 3,
} PpStatus;

/**
 * Opaque toy-environment handle.
 */
typedef struct PpEnv PpEnv;

/**
 * Per-family feature counts of a tiling/palette combination.
 */
typedef struct PpLayoutSizes {
  uint64_t basic;
  uint64_t bpros;
  uint64_t bprot;
  uint64_t total;
} PpLayoutSizes;

/**
 * Episode/batch configuration. `planner` is a name such as `iw1`,
 * `iwg`, `iws`, `rollout-iw`, `ra-rollout-iw` or `ras-rollout-iw`.
 * Exactly one of `budget_calls` / `budget_seconds` must be nonzero.
 */
typedef struct PpRunConfig {
  const char *planner;
  uint64_t budget_calls;
  double budget_seconds;
  uint32_t frameskip;
  double gamma;
  double alpha;
  uint64_t seed;
  uint64_t max_frames;
  bool caching;
  uint32_t runs;
} PpRunConfig;

/**
 * Aggregate result of a batch of episodes.
 */
typedef struct PpEpisodeResult {
  double mean_score;
  double first_score;
  uint32_t runs;
  uint64_t total_frames;
  uint64_t total_decisions;
  uint64_t total_sim_calls;
} PpEpisodeResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. Valid
 * until the next failing call on the same thread.
 */
const char *pp_last_error(void);

/**
 * Library version as a static string.
 */
const char *pp_version(void);

/**
 * Creates a toy environment from a spec string: `chain:L`,
 * `latched-chain:L:LATCH`, `collector:WxH`, `hazard:L`, `frozen`, or a
 * full TOML environment definition prefixed with `toml:`.
 *
 * # Safety
 * `spec` must be a valid NUL-terminated string and `out` a valid
 * pointer; the returned handle must be released with [`pp_env_free`].
 */
enum PpStatus pp_env_new(const char *spec, struct PpEnv **out);

/**
 * Releases an environment handle. A null handle is a no-op.
 *
 * # Safety
 * `env` must have come from [`pp_env_new`] and not been freed before.
 */
void pp_env_free(struct PpEnv *env);

/**
 * Number of actions the environment accepts.
 *
 * # Safety
 * `env` must be a live handle and `out` a valid pointer.
 */
enum PpStatus pp_env_action_count(const struct PpEnv *env, uint32_t *out);

/**
 * Screen dimensions and palette size of the environment.
 *
 * # Safety
 * `env` must be a live handle; out pointers must be valid.
 */
enum PpStatus pp_env_screen_dims(const struct PpEnv *env,
                                 uint32_t *width,
                                 uint32_t *height,
                                 uint16_t *palette);

/**
 * Feature counts for a tile grid and palette (Basic / B-PROS / B-PROT
 * family sizes and their total).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PpStatus pp_layout_sizes(uint32_t tile_cols,
                              uint32_t tile_rows,
                              uint16_t palette,
                              struct PpLayoutSizes *out);

/**
 * Integer log2 bucket of an accrued score (0 for non-positive scores).
 */
int64_t pp_logscore(double reward);

/**
 * Runs a batch of episodes on the environment and fills the aggregate
 * result. The handle itself is not consumed; each run starts from a
 * fresh reset copy.
 *
 * # Safety
 * `env` must be a live handle; `cfg` and `out` must be valid pointers
 * and `cfg->planner` a valid NUL-terminated string.
 */
enum PpStatus pp_run_batch(struct PpEnv *env,
                           const struct PpRunConfig *cfg,
                           struct PpEpisodeResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIXELPLAN_H */
