#ifndef RCS_H
#define RCS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RcsStatus {
  RCS_STATUS_OK = 0,
  RCS_STATUS_NULL_POINTER = 1,
  RCS_STATUS_INVALID_UTF8 = 2,
  RCS_STATUS_VALIDATION = 3,
  RCS_STATUS_DOMAIN = 4,
  RCS_STATUS_CAPACITY = 5,
  RCS_STATUS_TOO_LARGE = 6,
  RCS_STATUS_CONFIG = 7,
  RCS_STATUS_DEADLOCK = 8,
  RCS_STATUS_IO = 9,
  RCS_STATUS_SERIALIZATION = 10,
  /**
   * The requested entry does not exist.
   */
  RCS_STATUS_OUT_OF_RANGE = 11,
  RCS_STATUS_PANIC = 12,
} RcsStatus;

/**
 * A parsed and validated scenario configuration.
 */
typedef struct RcsConfig RcsConfig;

/**
 * Gripper cost lookup table for one stack height.
 */
typedef struct RcsCostTable RcsCostTable;

/**
 * Metrics of one simulated run.
 */
typedef struct RcsReport RcsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *rcs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rcs_version(void);

/**
 * Parses a TOML configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum RcsStatus rcs_config_parse(const char *toml, struct RcsConfig **out);

/**
 * # Safety
 * `cfg` must come from [`rcs_config_parse`] or be null.
 */
void rcs_config_free(struct RcsConfig *cfg);

/**
 * Builds the cost table for stacks of `height` cells.
 *
 * # Safety
 * `out` must be writable.
 */
enum RcsStatus rcs_cost_table_new(size_t height, struct RcsCostTable **out);

/**
 * Placement cost `T(empty_level, layer)`; `OUT_OF_RANGE` where undefined.
 *
 * # Safety
 * `table` must be a live table and `out` writable.
 */
enum RcsStatus rcs_cost_table_get(const struct RcsCostTable *table,
                                  size_t empty_level,
                                  size_t layer,
                                  uint64_t *out);

/**
 * Total gripper cost of retrieving a bin at `layer`.
 *
 * # Safety
 * `table` must be a live table and `out` writable.
 */
enum RcsStatus rcs_retrieval_cost(const struct RcsCostTable *table,
                                  size_t empty_level,
                                  size_t layer,
                                  uint64_t *out);

/**
 * # Safety
 * `table` must come from [`rcs_cost_table_new`] or be null.
 */
void rcs_cost_table_free(struct RcsCostTable *table);

/**
 * Expected requests until each of `n` bins with popularities `p` has been
 * requested once. Writes infinity when any entry is zero.
 *
 * # Safety
 * `p` must point to `n` doubles (or be null with `n == 0`); `out` writable.
 */
enum RcsStatus rcs_expected_transform_requests(const double *p, size_t n, double *out);

/**
 * Simulates the configuration's first run.
 *
 * # Safety
 * `cfg` must be a live configuration and `out` writable.
 */
enum RcsStatus rcs_simulate(const struct RcsConfig *cfg, struct RcsReport **out);

/**
 * Mean retrieval time in seconds over requests that needed a robot.
 *
 * # Safety
 * `report` must be live and `out` writable.
 */
enum RcsStatus rcs_report_mean_retrieval(const struct RcsReport *report, double *out);

/**
 * Number of requests served.
 *
 * # Safety
 * `report` must be live and `out` writable.
 */
enum RcsStatus rcs_report_requests(const struct RcsReport *report, uint64_t *out);

/**
 * The run summary as a JSON object. Release it with [`rcs_string_free`].
 *
 * # Safety
 * `report` must be live and `out` writable.
 */
enum RcsStatus rcs_report_summary_json(const struct RcsReport *report, char **out);

/**
 * # Safety
 * `report` must come from [`rcs_simulate`] or be null.
 */
void rcs_report_free(struct RcsReport *report);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void rcs_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RCS_H */
