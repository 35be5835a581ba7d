#ifndef MIDHAUL_H
#define MIDHAUL_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum MhStatus {
  MH_STATUS_OK = 0,
  MH_STATUS_NULL_ARGUMENT = 1,
  MH_STATUS_INVALID_ARGUMENT = 2,
  MH_STATUS_IO = 3,
  MH_STATUS_INVALID_DATA = 4,
  MH_STATUS_UNCOVERABLE = 5,
  MH_STATUS_OUT_OF_RANGE = 6,
  MH_STATUS_INTERNAL = 7,
} MhStatus;

/**
 * Result of a planning run.
 */
typedef struct MhPlan MhPlan;

/**
 * Loaded nodes and paths together with radio parameters.
 */
typedef struct MhScenario MhScenario;

/**
 * Array and precoder settings for `mh_plan`.
 */
typedef struct MhPlanOptions {
  uint32_t cu_rows;
  uint32_t cu_cols;
  uint32_t du_rows;
  uint32_t du_cols;
  /**
   * 0 = SLNR, 1 = zero forcing.
   */
  uint32_t precoder;
  /**
   * 0 = greedy, 1 = exhaustive.
   */
  uint32_t mode;
  bool inter_cu_interference;
  double connectivity_threshold_dbm;
} MhPlanOptions;

/**
 * Per-link figures.
 */
typedef struct MhLink {
  double slnr_db;
  double sinr_db;
  double rate_bps;
} MhLink;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or null. Valid until the next call.
 */
const char *mh_last_error(void);

/**
 * Loads nodes and trace CSV files with default radio parameters.
 *
 * # Safety
 * Paths must be null or NUL-terminated strings; `out` must be writable.
 */
enum MhStatus mh_scenario_load(const char *nodes_path,
                               const char *trace_path,
                               struct MhScenario **out);

/**
 * # Safety
 * `s` must be null or a handle from `mh_scenario_load` not yet freed.
 */
void mh_scenario_free(struct MhScenario *s);

/**
 * Number of CUs in the scenario, 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live scenario handle.
 */
size_t mh_scenario_cu_count(const struct MhScenario *s);

/**
 * Number of DUs in the scenario, 0 for a null handle.
 *
 * # Safety
 * `s` must be null or a live scenario handle.
 */
size_t mh_scenario_du_count(const struct MhScenario *s);

/**
 * Sets the per-link rate target in bit/s.
 *
 * # Safety
 * `s` must be null or a live scenario handle.
 */
enum MhStatus mh_scenario_set_rate_target(struct MhScenario *s, double rate_bps);

/**
 * Default planning options: 16x16 arrays, SLNR, greedy, -100 dBm threshold.
 */
struct MhPlanOptions mh_plan_options_default(void);

/**
 * Finds the smallest CU set meeting the rate target. An infeasible
 * outcome still yields a plan; check `mh_plan_feasible`.
 *
 * # Safety
 * `s` must be a live scenario handle, `options` null or valid, `out` writable.
 */
enum MhStatus mh_plan(const struct MhScenario *s,
                      const struct MhPlanOptions *options,
                      struct MhPlan **out);

/**
 * # Safety
 * `p` must be null or a handle from `mh_plan` not yet freed.
 */
void mh_plan_free(struct MhPlan *p);

/**
 * # Safety
 * `p` must be null or a live plan handle.
 */
bool mh_plan_feasible(const struct MhPlan *p);

/**
 * # Safety
 * `p` must be null or a live plan handle.
 */
size_t mh_plan_selected_count(const struct MhPlan *p);

/**
 * # Safety
 * `p` must be null or a live plan handle.
 */
size_t mh_plan_link_count(const struct MhPlan *p);

/**
 * Minimum link rate in bit/s, 0 when a DU is unassigned.
 *
 * # Safety
 * `p` must be null or a live plan handle.
 */
double mh_plan_min_rate_bps(const struct MhPlan *p);

/**
 * Copies link `index` (links are ordered by DU id) into `out`.
 *
 * # Safety
 * `p` must be a live plan handle and `out` writable.
 */
enum MhStatus mh_plan_link(const struct MhPlan *p, size_t index, struct MhLink *out);

/**
 * JSON report for the plan, or null on error. Free with `mh_string_free`.
 *
 * # Safety
 * `p` must be null or a live plan handle.
 */
char *mh_plan_report_json(const struct MhPlan *p);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void mh_string_free(char *s);

/**
 * Achievable rate in bit/s for a linear SINR under default radio parameters.
 */
double mh_link_rate(double sinr_linear);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MIDHAUL_H */
