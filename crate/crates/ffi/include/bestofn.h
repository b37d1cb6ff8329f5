#ifndef BESTOFN_H
#define BESTOFN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BonStatus {
  BON_STATUS_OK = 0,
  BON_STATUS_NULL_POINTER = 1,
  BON_STATUS_INVALID_UTF8 = 2,
  BON_STATUS_INVALID_ARGUMENT = 3,
  BON_STATUS_PARSE = 4,
  BON_STATUS_VALIDATION = 5,
  BON_STATUS_STATE_SPACE_TOO_LARGE = 6,
  BON_STATUS_TOLERANCE_EXCEEDED = 7,
  BON_STATUS_BUFFER_TOO_SMALL = 8,
  BON_STATUS_PANIC = 9,
} BonStatus;

typedef enum BonInteraction {
  BON_INTERACTION_NOT_APPLICABLE = 0,
  BON_INTERACTION_SYNERGISTIC = 1,
  BON_INTERACTION_ANTAGONISTIC = 2,
} BonInteraction;

typedef enum BonVariant {
  BON_VARIANT_SYMMETRY_BREAKING = 0,
  BON_VARIANT_COST_ASYMMETRIC = 1,
  BON_VARIANT_QUALITY_ASYMMETRIC = 2,
  BON_VARIANT_SYNERGISTIC = 3,
  BON_VARIANT_ANTAGONISTIC = 4,
} BonVariant;

typedef enum BonEngine {
  BON_ENGINE_AGENTS = 0,
  BON_ENGINE_SSA = 1,
} BonEngine;

typedef struct BonBatch BonBatch;

typedef struct BonConfig BonConfig;

typedef struct BonInstance BonInstance;

typedef struct BonTrajectory BonTrajectory;

/**
 * Outcome of a single run. `winner` is 0 when the run did not decide.
 */
typedef struct BonRunResult {
  uint64_t seed;
  bool decided;
  uint32_t winner;
  double decision_time;
  uint64_t events;
} BonRunResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *bon_version(void);

/**
 * Length in bytes of the last error message on this thread, excluding the
 * terminating NUL; 0 when there is none.
 */
size_t bon_last_error_length(void);

/**
 * Copies the last error message on this thread into `buf` as a
 * NUL-terminated string. Needs `bon_last_error_length() + 1` bytes.
 *
 * # Safety
 * `buf` must point to `capacity` writable bytes.
 */
enum BonStatus bon_last_error_message(char *buf, size_t capacity);

/**
 * Builds a validated instance from `n` qualities and costs.
 *
 * # Safety
 * `quality` and `cost` must point to `n` doubles; `out` must be writable.
 */
enum BonStatus bon_instance_new(size_t n,
                                const double *quality,
                                const double *cost,
                                enum BonInteraction interaction,
                                struct BonInstance **out);

/**
 * Parses an instance such as
 * `{"n":2,"quality":[1,0.5],"cost":[1,1],"interaction":"na"}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum BonStatus bon_instance_from_json(const char *json, struct BonInstance **out);

/**
 * # Safety
 * `instance` must be null or a handle from this library, freed only once.
 */
void bon_instance_free(struct BonInstance *instance);

/**
 * # Safety
 * `instance` must be a live handle; `n` must be writable.
 */
enum BonStatus bon_instance_n(const struct BonInstance *instance, size_t *n);

/**
 * # Safety
 * `instance` must be a live handle; `variant` must be writable.
 */
enum BonStatus bon_instance_classify(const struct BonInstance *instance,
                                     double epsilon,
                                     enum BonVariant *variant);

/**
 * Writes the one-based labels of the best options into `buf`.
 *
 * # Safety
 * `instance` must be a live handle; `buf` must hold `capacity` values and
 * `len` must be writable.
 */
enum BonStatus bon_instance_best_options(const struct BonInstance *instance,
                                         double epsilon,
                                         uint32_t *buf,
                                         size_t capacity,
                                         size_t *len);

/**
 * A configuration with every field at its default.
 *
 * # Safety
 * `out` must be writable.
 */
enum BonStatus bon_config_default(struct BonConfig **out);

/**
 * Parses a swarm configuration; absent keys take their defaults.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum BonStatus bon_config_from_json(const char *json, struct BonConfig **out);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum BonStatus bon_config_set_seed(struct BonConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum BonStatus bon_config_set_population(struct BonConfig *config, size_t population);

/**
 * # Safety
 * `config` must be null or a handle from this library, freed only once.
 */
void bon_config_free(struct BonConfig *config);

/**
 * Runs one agent-based simulation with the configuration's seed.
 *
 * # Safety
 * `instance` and `config` must be live handles; `result` must be writable.
 */
enum BonStatus bon_simulate(const struct BonInstance *instance,
                            const struct BonConfig *config,
                            struct BonRunResult *result);

/**
 * Runs `repetitions` runs with seeds `seed_base + k`.
 *
 * # Safety
 * `instance` and `config` must be live handles; `out` must be writable.
 */
enum BonStatus bon_batch_run(enum BonEngine engine,
                             const struct BonInstance *instance,
                             const struct BonConfig *config,
                             size_t repetitions,
                             uint64_t seed_base,
                             struct BonBatch **out);

/**
 * # Safety
 * `batch` must be null or a handle from this library, freed only once.
 */
void bon_batch_free(struct BonBatch *batch);

/**
 * # Safety
 * `batch` must be a live handle; the outputs must be writable.
 */
enum BonStatus bon_batch_counts(const struct BonBatch *batch, size_t *repetitions, size_t *decided);

/**
 * Per-option exit probabilities among decided runs.
 *
 * # Safety
 * `batch` must be a live handle; `buf` must hold `capacity` doubles and
 * `len` must be writable.
 */
enum BonStatus bon_batch_exit_probabilities(const struct BonBatch *batch,
                                            double *buf,
                                            size_t capacity,
                                            size_t *len);

/**
 * Mean decision time over decided runs; NaN when no run decided.
 *
 * # Safety
 * `batch` must be a live handle; `mean` must be writable.
 */
enum BonStatus bon_batch_mean_decision_time(const struct BonBatch *batch, double *mean);

/**
 * Copies run `index` of the batch.
 *
 * # Safety
 * `batch` must be a live handle; `result` must be writable.
 */
enum BonStatus bon_batch_run_at(const struct BonBatch *batch,
                                size_t index,
                                struct BonRunResult *result);

/**
 * Exact exit probabilities and mean decision time of the finite swarm.
 * `state_limit` of 0 uses the library default.
 *
 * # Safety
 * `instance` and `config` must be live handles; `probabilities` must hold
 * `capacity` doubles; `len` and `mean_time` must be writable.
 */
enum BonStatus bon_absorb(const struct BonInstance *instance,
                          const struct BonConfig *config,
                          size_t state_limit,
                          double *probabilities,
                          size_t capacity,
                          size_t *len,
                          double *mean_time);

/**
 * Integrates the mean-field equations from the configuration's initial
 * state over `[0, horizon]` with RK4 steps of `dt`.
 *
 * # Safety
 * `instance` and `config` must be live handles; `out` must be writable.
 */
enum BonStatus bon_meanfield_integrate(const struct BonInstance *instance,
                                       const struct BonConfig *config,
                                       double horizon,
                                       double dt,
                                       struct BonTrajectory **out);

/**
 * # Safety
 * `trajectory` must be null or a handle from this library, freed only once.
 */
void bon_trajectory_free(struct BonTrajectory *trajectory);

/**
 * # Safety
 * `trajectory` must be a live handle; `len` must be writable.
 */
enum BonStatus bon_trajectory_len(const struct BonTrajectory *trajectory, size_t *len);

/**
 * Time and opinion fractions `e_i + d_i` of step `index`.
 *
 * # Safety
 * `trajectory` must be a live handle; `fractions` must hold `capacity`
 * doubles; `time` and `len` must be writable.
 */
enum BonStatus bon_trajectory_point(const struct BonTrajectory *trajectory,
                                    size_t index,
                                    double *time,
                                    double *fractions,
                                    size_t capacity,
                                    size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BESTOFN_H */
