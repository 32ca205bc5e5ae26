#ifndef SERPENT_H
#define SERPENT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SerpentStatus {
  SERPENT_STATUS_OK = 0,
  SERPENT_STATUS_NULL_POINTER = 1,
  /**
   * Config could not be parsed or failed validation.
   */
  SERPENT_STATUS_INVALID_CONFIG = 2,
  /**
   * Argument out of range (index, length, scenario id).
   */
  SERPENT_STATUS_INVALID_ARGUMENT = 3,
  SERPENT_STATUS_IO = 4,
  /**
   * The dynamics integrator diverged.
   */
  SERPENT_STATUS_BLOWUP = 5,
  /**
   * A bug inside the library; the handle involved should be freed.
   */
  SERPENT_STATUS_INTERNAL = 6,
} SerpentStatus;

typedef enum SerpentScenario {
  SERPENT_SCENARIO_RANDOM_WALK = 0,
  SERPENT_SCENARIO_TARGET_FOLLOW = 1,
  SERPENT_SCENARIO_CORRIDOR = 2,
} SerpentScenario;

/**
 * A validated configuration.
 */
typedef struct SerpentConfig SerpentConfig;

/**
 * A running 3D dynamics simulation.
 */
typedef struct SerpentDyn3d SerpentDyn3d;

/**
 * Scenario metrics. `time_to_target` is +infinity when the target was not
 * reached; `max_lateral_extent` is only set for corridor runs (NaN otherwise).
 */
typedef struct SerpentMetrics {
  double time_to_target;
  double path_length;
  uint64_t collisions;
  double heading_change_total;
  double energy_proxy;
  double max_lateral_extent;
} SerpentMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from this thread.
 */
const char *serpent_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *serpent_version(void);

/**
 * Parses and validates a TOML config held in `text`.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum SerpentStatus serpent_config_from_str(const char *text, struct SerpentConfig **out);

/**
 * Reads, parses and validates a config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SerpentStatus serpent_config_load(const char *path, struct SerpentConfig **out);

/**
 * # Safety
 * `cfg` must be null or a handle from this library not yet freed.
 */
void serpent_config_free(struct SerpentConfig *cfg);

/**
 * Number of joints of the configured snake.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum SerpentStatus serpent_config_joint_count(const struct SerpentConfig *cfg, size_t *out);

/**
 * Clamped joint commands of the configured gait at time `t`, one per joint.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must point to `len` writable doubles.
 */
enum SerpentStatus serpent_joint_targets(const struct SerpentConfig *cfg,
                                         double t,
                                         double *out,
                                         size_t len);

/**
 * Runs one planar scenario with `seed`.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum SerpentStatus serpent_sim2d_run(const struct SerpentConfig *cfg,
                                     enum SerpentScenario scenario,
                                     uint64_t seed,
                                     struct SerpentMetrics *out);

/**
 * Runs the configured generator chain and reports the final order parameter
 * and the standard deviation of the neighbour phase lags.
 *
 * # Safety
 * `cfg` must be a live handle; `r_final` and `lag_std` must be writable.
 */
enum SerpentStatus serpent_lattice_run(const struct SerpentConfig *cfg,
                                       uint64_t seed,
                                       double beta_scale,
                                       double *r_final,
                                       double *lag_std);

/**
 * Straight chain at rest on the ground, head at the origin, facing +x.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum SerpentStatus serpent_dyn3d_new(const struct SerpentConfig *cfg, struct SerpentDyn3d **out);

/**
 * # Safety
 * `sim` must be null or a live handle.
 */
void serpent_dyn3d_free(struct SerpentDyn3d *sim);

/**
 * Advances one step toward the joint angle `targets` (one per joint).
 *
 * # Safety
 * `sim` must be a live handle; `targets` must point to `len` doubles.
 */
enum SerpentStatus serpent_dyn3d_step(struct SerpentDyn3d *sim, const double *targets, size_t len);

/**
 * Simulated time, seconds.
 *
 * # Safety
 * `sim` must be a live handle; `out` must be writable.
 */
enum SerpentStatus serpent_dyn3d_time(const struct SerpentDyn3d *sim, double *out);

/**
 * Total mechanical energy with the servo springs measured against `targets`
 * (`len` may be 0 to leave them out).
 *
 * # Safety
 * `sim` must be a live handle; `targets` must point to `len` doubles;
 * `out` must be writable.
 */
enum SerpentStatus serpent_dyn3d_energy(const struct SerpentDyn3d *sim,
                                        const double *targets,
                                        size_t len,
                                        double *out);

/**
 * World position of link `index` (0 = head) written to `xyz[3]`.
 *
 * # Safety
 * `sim` must be a live handle; `xyz` must point to 3 writable doubles.
 */
enum SerpentStatus serpent_dyn3d_link_position(const struct SerpentDyn3d *sim,
                                               size_t index,
                                               double *xyz);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SERPENT_H */
