#ifndef SCUC_H
#define SCUC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ScucMode {
  SCUC_MODE_MONOLITHIC = 0,
  SCUC_MODE_TD = 1,
  SCUC_MODE_TD_R = 2,
} ScucMode;

typedef enum ScucSeparation {
  SCUC_SEPARATION_DYNAMIC = 0,
  SCUC_SEPARATION_FILTERING = 1,
  SCUC_SEPARATION_ENUMERATE = 2,
} ScucSeparation;

/**
 * Result of every fallible call.
 */
typedef enum ScucStatus {
  SCUC_STATUS_OK = 0,
  SCUC_STATUS_NULL_POINTER = 1,
  SCUC_STATUS_INVALID_UTF8 = 2,
  /**
   * malformed or inconsistent instance or schedule data
   */
  SCUC_STATUS_INVALID_DATA = 3,
  SCUC_STATUS_INVALID_ARGUMENT = 4,
  SCUC_STATUS_IO = 5,
  /**
   * no feasible schedule exists
   */
  SCUC_STATUS_INFEASIBLE = 6,
  /**
   * the time limit passed before any schedule was found
   */
  SCUC_STATUS_NO_INCUMBENT = 7,
  SCUC_STATUS_SOLVER_FAILURE = 8,
  SCUC_STATUS_PANIC = 9,
} ScucStatus;

/**
 * Parsed and validated problem data.
 */
typedef struct ScucInstance ScucInstance;

/**
 * A schedule bound to the instance it was solved or parsed for.
 */
typedef struct ScucSchedule ScucSchedule;

/**
 * Solve settings. Start from [`scuc_solve_options_default`].
 */
typedef struct ScucSolveOptions {
  enum ScucMode mode;
  enum ScucSeparation separation;
  uint32_t s_i;
  uint32_t s_r;
  uint32_t dt;
  uint32_t ds;
  double gap_sub;
  double gap_final;
  double time_limit_seconds;
  /**
   * 0 uses the available parallelism
   */
  uint32_t threads;
  bool rins;
  uint32_t rins_window;
  uint32_t rins_stride;
} ScucSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *scuc_last_error_message(void);

/**
 * Static, NUL-terminated library version.
 */
const char *scuc_version(void);

struct ScucSolveOptions scuc_solve_options_default(void);

/**
 * Parses an instance from a NUL-terminated JSON document.
 *
 * # Safety
 * `json` must be a valid C string and `out` a valid pointer.
 */
enum ScucStatus scuc_instance_from_json(const char *json, struct ScucInstance **out);

/**
 * Reads and parses an instance file.
 *
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum ScucStatus scuc_instance_from_file(const char *path, struct ScucInstance **out);

/**
 * # Safety
 * `instance` must come from this library and not be freed already.
 */
void scuc_instance_free(struct ScucInstance *instance);

/**
 * Sizes of the instance. Any output pointer may be null.
 *
 * # Safety
 * `instance` must be a live handle; non-null outputs must be valid.
 */
enum ScucStatus scuc_instance_dims(const struct ScucInstance *instance,
                                   uintptr_t *buses,
                                   uintptr_t *generators,
                                   uintptr_t *lines,
                                   uintptr_t *contingencies,
                                   uintptr_t *horizon);

/**
 * Solves the instance. `options` may be null for the defaults. On
 * [`ScucStatus::Ok`] a schedule handle is stored in `out`; on
 * `Infeasible` or `NoIncumbent` `out` is set to null.
 *
 * # Safety
 * `instance` must be a live handle and `out` a valid pointer.
 */
enum ScucStatus scuc_solve(const struct ScucInstance *instance,
                           const struct ScucSolveOptions *options,
                           struct ScucSchedule **out);

/**
 * Parses a schedule file's JSON against `instance`.
 *
 * # Safety
 * `instance` must be a live handle, `json` a valid C string and `out` a
 * valid pointer.
 */
enum ScucStatus scuc_schedule_from_json(const struct ScucInstance *instance,
                                        const char *json,
                                        struct ScucSchedule **out);

/**
 * # Safety
 * `schedule` must come from this library and not be freed already.
 */
void scuc_schedule_free(struct ScucSchedule *schedule);

/**
 * Total objective in dollars.
 *
 * # Safety
 * `schedule` must be a live handle and `objective` a valid pointer.
 */
enum ScucStatus scuc_schedule_objective(const struct ScucSchedule *schedule, double *objective);

/**
 * Commitment and output of generator `generator` (zero-based) in period
 * `period` (one-based).
 *
 * # Safety
 * `schedule` must be a live handle; non-null outputs must be valid.
 */
enum ScucStatus scuc_schedule_unit(const struct ScucSchedule *schedule,
                                   uintptr_t generator,
                                   uintptr_t period,
                                   bool *committed,
                                   double *power);

/**
 * Serializes the schedule file. Release the string with
 * [`scuc_string_free`].
 *
 * # Safety
 * `schedule` must be a live handle and `out` a valid pointer.
 */
enum ScucStatus scuc_schedule_to_json(const struct ScucSchedule *schedule, char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed already.
 */
void scuc_string_free(char *s);

/**
 * Checks every constraint of the schedule's instance. `violations` may be
 * null.
 *
 * # Safety
 * `schedule` must be a live handle, `feasible` a valid pointer.
 */
enum ScucStatus scuc_validate(const struct ScucSchedule *schedule,
                              bool *feasible,
                              uintptr_t *violations);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCUC_H */
