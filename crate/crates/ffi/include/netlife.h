#ifndef NETLIFE_H
#define NETLIFE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define NETLIFE_STATE_UNCLASSIFIED -1

#define NETLIFE_STATE_NO 0

#define NETLIFE_STATE_SLOW 1

#define NETLIFE_STATE_FAST 2

#define NETLIFE_STATE_ABSOLUTE 3

typedef enum NetlifeStatus {
  NETLIFE_STATUS_OK = 0,
  NETLIFE_STATUS_NULL_POINTER = 1,
  NETLIFE_STATUS_INVALID_CONFIG = 2,
  NETLIFE_STATUS_INVALID_ARGUMENT = 3,
  NETLIFE_STATUS_INSUFFICIENT_DATA = 4,
  NETLIFE_STATUS_NETWORK_DEAD = 5,
  NETLIFE_STATUS_IO = 6,
  NETLIFE_STATUS_PANIC = 7,
} NetlifeStatus;

/**
 * Simulation parameters. Create with [`netlife_config_new`].
 */
typedef struct NetlifeConfig NetlifeConfig;

/**
 * A network advanced one step at a time. Create with [`netlife_sim_new`].
 */
typedef struct NetlifeSim NetlifeSim;

/**
 * Observables after one step. Counts are for that step only.
 */
typedef struct NetlifeStepRecord {
  uint64_t t;
  /**
   * Packets queued anywhere in the network.
   */
  uint64_t s;
  /**
   * Nodes whose queue exceeded capacity before delivery.
   */
  uint64_t n_c;
  double e_total;
  double e_max;
  double e_min;
  uint64_t generated;
  uint64_t forwarded;
  uint64_t arrived;
} NetlifeStepRecord;

/**
 * Result of a full run. A value is meaningful only when its `has_` flag is
 * set.
 */
typedef struct NetlifeSummary {
  uint64_t seed;
  bool died;
  uint64_t steps;
  bool has_lifetime;
  uint64_t lifetime;
  bool has_delta_s;
  double delta_s;
  bool has_tau0;
  double tau0;
  bool has_k;
  double k;
  /**
   * One of the `NETLIFE_STATE_` constants.
   */
  int32_t state;
  bool has_range_at_death;
  double range_at_death;
  double e_total_end;
  uint64_t generated;
  uint64_t arrived;
  uint64_t forwarded;
  double deliveries_per_step;
  bool has_predicted_general;
  double predicted_general;
  bool has_predicted_no_congestion;
  double predicted_no_congestion;
  bool has_predicted_absolute;
  double predicted_absolute;
} NetlifeSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call into this library on the same
 * thread.
 */
const char *netlife_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *netlife_version(void);

/**
 * A configuration holding the reference defaults. Free with
 * [`netlife_config_free`].
 */
struct NetlifeConfig *netlife_config_new(void);

/**
 * # Safety
 * `config` must come from [`netlife_config_new`] and not be freed twice.
 * Null is ignored.
 */
void netlife_config_free(struct NetlifeConfig *config);

/**
 * Sets one parameter by its flag name (`nodes`, `area`, `radius`, `speed`,
 * `alpha`, `rate`, `capacity`, `energy`, `hop-cost`, `routing`, `seed`,
 * `max-steps`, `transient-cutoff`). Values are checked by
 * [`netlife_config_validate`], not here.
 *
 * # Safety
 * `config` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum NetlifeStatus netlife_config_set(struct NetlifeConfig *config,
                                      const char *key,
                                      const char *value);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum NetlifeStatus netlife_config_validate(const struct NetlifeConfig *config);

/**
 * Starts a network from `config` (which is copied) and stores the handle in
 * `*out`. Free with [`netlife_sim_free`].
 *
 * # Safety
 * `config` must be a live handle and `out` writable.
 */
enum NetlifeStatus netlife_sim_new(const struct NetlifeConfig *config, struct NetlifeSim **out);

/**
 * # Safety
 * `sim` must come from [`netlife_sim_new`] and not be freed twice. Null is
 * ignored.
 */
void netlife_sim_free(struct NetlifeSim *sim);

/**
 * Advances one step and writes its record to `*out` when `out` is not null.
 * Fails with `NETLIFE_STATUS_NETWORK_DEAD` once a node has died.
 *
 * # Safety
 * `sim` must be a live handle; `out` null or writable.
 */
enum NetlifeStatus netlife_sim_step(struct NetlifeSim *sim, struct NetlifeStepRecord *out);

/**
 * The record of the initial state, before any step.
 *
 * # Safety
 * `sim` must be a live handle and `out` writable.
 */
enum NetlifeStatus netlife_sim_initial_record(const struct NetlifeSim *sim,
                                              struct NetlifeStepRecord *out);

/**
 * True once some node can no longer pay for a hop. False for null.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
bool netlife_sim_is_dead(const struct NetlifeSim *sim);

/**
 * Steps taken so far. Zero for null.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
uint64_t netlife_sim_now(const struct NetlifeSim *sim);

/**
 * Runs `config` to death or `max-steps` with the default classifier and
 * writes the summary to `*out`.
 *
 * # Safety
 * `config` must be a live handle and `out` writable.
 */
enum NetlifeStatus netlife_run(const struct NetlifeConfig *config, struct NetlifeSummary *out);

/**
 * `min(rho * tau0, C)`.
 */
double netlife_omega(double gen_rate, double tau0, double capacity);

/**
 * Free-flow lifetime `(E0 - R/2) / (rho * tau0 * dE)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum NetlifeStatus netlife_predict_no_congestion(double init_energy,
                                                 double range_at_death,
                                                 double gen_rate,
                                                 double tau0,
                                                 double hop_cost,
                                                 double *out);

/**
 * Saturated lifetime `E0 / (C * dE)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum NetlifeStatus netlife_predict_absolute(double init_energy,
                                            double capacity,
                                            double hop_cost,
                                            double *out);

/**
 * `k * E0 / (min(rho * tau0, C) * dE)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum NetlifeStatus netlife_predict_unified(double init_energy,
                                           double gen_rate,
                                           double tau0,
                                           double capacity,
                                           double hop_cost,
                                           double k,
                                           double *out);

/**
 * `k = T * min(rho * tau0, C) * dE / E0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum NetlifeStatus netlife_extract_k(double lifetime,
                                     double init_energy,
                                     double gen_rate,
                                     double tau0,
                                     double capacity,
                                     double hop_cost,
                                     double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETLIFE_H */
