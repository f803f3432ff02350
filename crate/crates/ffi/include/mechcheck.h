#ifndef MECHCHECK_H
#define MECHCHECK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  MC_STATUS_OK = 0,
  /**
   * Null pointer, invalid UTF-8, unknown label or bad option.
   */
  MC_STATUS_INVALID_ARGUMENT = 1,
  MC_STATUS_PARSE_ERROR = 2,
  MC_STATUS_VALIDATION_ERROR = 3,
  MC_STATUS_BUDGET_EXCEEDED = 4,
  MC_STATUS_IO_ERROR = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  MC_STATUS_INTERNAL = 6,
} McStatus;

typedef enum {
  MC_PROPERTY_DIST_PRESERVE = 0,
  MC_PROPERTY_STAGE_CHAIN = 1,
  MC_PROPERTY_BIC = 2,
  /**
   * VCG on the scenario's own types, outcomes and valuations.
   */
  MC_PROPERTY_VCG_TRUTH = 3,
} McProperty;

typedef enum {
  MC_VERDICT_PASS = 0,
  MC_VERDICT_FAIL = 1,
  MC_VERDICT_ESTIMATED = 2,
} McVerdict;

typedef struct McReport McReport;

typedef struct McScenario McScenario;

typedef struct {
  /**
   * Non-zero selects Monte Carlo mode.
   */
  uint8_t monte_carlo;
  uint64_t samples;
  uint64_t seed;
  uint32_t jobs;
  uint64_t budget;
  /**
   * Non-zero replaces Clarke payments by first-price payments.
   */
  uint8_t first_price;
} McOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *mc_last_error(void);

/**
 * Library version as a static string.
 */
const char *mc_version(void);

McOptions mc_options_default(void);

/**
 * Parses a scenario document. On success `*out` receives a handle to
 * release with [`mc_scenario_free`].
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
McStatus mc_scenario_from_json(const char *json, McScenario **out);

/**
 * Reads and parses a scenario file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
McStatus mc_scenario_from_path(const char *path, McScenario **out);

/**
 * # Safety
 * `scenario` must be null or a handle from this library not yet freed.
 */
void mc_scenario_free(McScenario *scenario);

/**
 * Runs one property check. `options` may be null for the defaults. On
 * success `*out` receives a report handle to release with
 * [`mc_report_free`]; a violated property is still `MC_STATUS_OK`, read the
 * verdict with [`mc_report_verdict`].
 *
 * # Safety
 * `scenario` must be a live handle, `options` null or valid, `out` valid.
 */
McStatus mc_check(const McScenario *scenario,
                  McProperty property,
                  const McOptions *options,
                  McReport **out);

/**
 * # Safety
 * `report` must be a live handle.
 */
McVerdict mc_report_verdict(const McReport *report);

/**
 * Number of violating instances found.
 *
 * # Safety
 * `report` must be a live handle.
 */
uint64_t mc_report_violations(const McReport *report);

/**
 * The report as JSON (same format as the command line). Release with
 * [`mc_string_free`]. Returns null on a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
char *mc_report_to_json(const McReport *report);

/**
 * # Safety
 * `report` must be null or a handle from this library not yet freed.
 */
void mc_report_free(McReport *report);

/**
 * Exact expected RSM utility of the agent at 1-based position `agent`
 * with type `true_type` bidding `bid`. `*out` receives the rational as a
 * string (`"p/q"` or an integer); release it with [`mc_string_free`].
 *
 * # Safety
 * `scenario` must be a live handle, the labels nul-terminated strings and
 * `out` a valid pointer.
 */
McStatus mc_my_util(const McScenario *scenario,
                    size_t agent,
                    const char *true_type,
                    const char *bid,
                    uint64_t budget,
                    char **out);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void mc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MECHCHECK_H */
