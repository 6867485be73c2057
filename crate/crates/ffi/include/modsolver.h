#ifndef MODSOLVER_H
#define MODSOLVER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Report detail levels, mirroring the model-language attribute.
 */
typedef enum MsReportLevel {
  MsReportLevel_Solved = 0,
  MsReportLevel_All = 1,
  MsReportLevel_AllDetails = 2,
} MsReportLevel;

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum MsStatus {
  MsStatus_Ok = 0,
  /**
   * Lexical or syntax error.
   */
  MsStatus_ParseError = 1,
  /**
   * The document parsed but validation found errors.
   */
  MsStatus_ValidationError = 2,
  /**
   * The run finished without reaching convergence.
   */
  MsStatus_NotConverged = 3,
  /**
   * Runtime failure (evaluation, limit cycling, solver breakdown).
   */
  MsStatus_RuntimeError = 4,
  /**
   * Case file or converter configuration error.
   */
  MsStatus_InputError = 5,
  /**
   * Null pointer or malformed UTF-8 argument.
   */
  MsStatus_BadArgument = 6,
} MsStatus;

/**
 * Opaque parsed-and-validated model handle.
 */
typedef struct MsModel MsModel;

/**
 * Opaque run-report handle.
 */
typedef struct MsReport MsReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null.
 * The caller owns the returned string.
 */
char *ms_last_error(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be a pointer previously returned by this library and not yet
 * freed, or null.
 */
void ms_string_free(char *s);

/**
 * Parse and validate a model file. On success writes a handle to
 * `out_model`; the caller releases it with [`ms_model_free`].
 *
 * # Safety
 * `source` must be a valid NUL-terminated string; `out_model` must be a
 * valid pointer.
 */
enum MsStatus ms_model_parse(const char *source, struct MsModel **out_model);

/**
 * # Safety
 * `model` must be a handle from [`ms_model_parse`], not yet freed, or null.
 */
void ms_model_free(struct MsModel *model);

/**
 * Run a parsed model with the given random seed. On success (including a
 * non-converged but orderly run) writes a report handle to `out_report`.
 *
 * # Safety
 * `model` must be a live handle from [`ms_model_parse`]; `out_report` must
 * be a valid pointer.
 */
enum MsStatus ms_model_run(const struct MsModel *model,
                           uint64_t seed,
                           struct MsReport **out_report);

/**
 * # Safety
 * `report` must be a handle from [`ms_model_run`], not yet freed, or null.
 */
void ms_report_free(struct MsReport *report);

/**
 * # Safety
 * `report` must be a live handle from [`ms_model_run`] or null.
 */
bool ms_report_converged(const struct MsReport *report);

/**
 * Iterations of the final solve, or 0 when nothing ran.
 *
 * # Safety
 * `report` must be a live handle from [`ms_model_run`] or null.
 */
uint64_t ms_report_iterations(const struct MsReport *report);

/**
 * Number of repeat records in the run.
 *
 * # Safety
 * `report` must be a live handle from [`ms_model_run`] or null.
 */
uint64_t ms_report_records(const struct MsReport *report);

/**
 * Render the report at a detail level. The caller owns the string.
 *
 * # Safety
 * `report` must be a live handle from [`ms_model_run`].
 */
char *ms_report_text(const struct MsReport *report, enum MsReportLevel level);

/**
 * Comma-delimited repeats trace, or null when the model has no Repeats
 * group. The caller owns the string.
 *
 * # Safety
 * `report` must be a live handle from [`ms_model_run`].
 */
char *ms_report_trace_csv(const struct MsReport *report);

/**
 * Convert a MATPOWER case file into model text. `config_source` may be
 * null for defaults. On success writes the model text to `out_text`.
 *
 * # Safety
 * `case_source` must be a valid NUL-terminated string; `config_source`
 * must be valid or null; `out_text` must be a valid pointer.
 */
enum MsStatus ms_convert_case(const char *case_source, const char *config_source, char **out_text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODSOLVER_H */
