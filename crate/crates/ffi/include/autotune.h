/* C interface to the autotune runtime parameter tuning library. */

#ifndef AUTOTUNE_H
#define AUTOTUNE_H

/* Generated by cbindgen from crates/ffi. Do not edit by hand. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum AtStatus {
  AT_STATUS_OK = 0,
  AT_STATUS_NULL_POINTER = 1,
  AT_STATUS_CONFIG = 2,
  AT_STATUS_DIMENSION = 3,
  AT_STATUS_OUT_OF_DOMAIN = 4,
  AT_STATUS_USAGE = 5,
  AT_STATUS_CONTRACT = 6,
  /**
   * A user callback reported failure (non-zero return).
   */
  AT_STATUS_TARGET = 7,
  AT_STATUS_PANIC = 8,
} AtStatus;

/**
 * Opaque optimizer handle.
 */
typedef struct AtOptimizer AtOptimizer;

/**
 * Opaque tuning-session handle.
 */
typedef struct AtSession AtSession;

/**
 * Timed target over an `int` point. Return 0 on success.
 */
typedef int (*AtRuntimeTargetInt)(const int *point, uintptr_t len, void *user_data);

/**
 * Timed target over a `double` point. Return 0 on success.
 */
typedef int (*AtRuntimeTargetDouble)(const double *point, uintptr_t len, void *user_data);

/**
 * Cost-returning target over an `int` point: writes the cost to `cost`
 * and returns 0 on success.
 */
typedef int (*AtCostTargetInt)(const int *point, uintptr_t len, void *user_data, double *cost);

/**
 * Cost-returning target over a `double` point.
 */
typedef int (*AtCostTargetDouble)(const double *point, uintptr_t len, void *user_data, double *cost);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length in
 * bytes, excluding the terminator; 0 when there is no error.
 */
uintptr_t at_last_error_message(char *buf, uintptr_t len);

/**
 * Releases a string returned by this library.
 */
void at_string_free(char *s);

/**
 * Creates a Coupled Simulated Annealing optimizer.
 */
enum AtStatus at_csa_new(uintptr_t dim,
                         uintptr_t num_opt,
                         uintptr_t max_iter,
                         uint64_t seed,
                         struct AtOptimizer **out);

/**
 * Creates a Nelder-Mead optimizer. `max_iter == 0` means no evaluation cap.
 */
enum AtStatus at_nelder_mead_new(uintptr_t dim,
                                 double error,
                                 uintptr_t max_iter,
                                 uint64_t seed,
                                 struct AtOptimizer **out);

void at_optimizer_free(struct AtOptimizer *opt);

/**
 * Feeds `cost` for the last candidate and writes the next candidate, in
 * normalized `[-1, 1]` coordinates, into `point` (`len` must equal the
 * dimension).
 */
enum AtStatus at_optimizer_run(struct AtOptimizer *opt, double cost, double *point, uintptr_t len);

uintptr_t at_optimizer_num_points(const struct AtOptimizer *opt);

uintptr_t at_optimizer_dimension(const struct AtOptimizer *opt);

bool at_optimizer_is_end(const struct AtOptimizer *opt);

/**
 * Writes the best cost seen so far into `out`; `AT_STATUS_USAGE` when no
 * finite cost has been observed.
 */
enum AtStatus at_optimizer_best_cost(const struct AtOptimizer *opt, double *out);

/**
 * Resets the optimizer; negative levels are rejected.
 */
enum AtStatus at_optimizer_reset(struct AtOptimizer *opt, int level);

/**
 * State summary as a newly allocated string; free it with
 * [`at_string_free`]. Returns null for a null handle.
 */
char *at_optimizer_describe(const struct AtOptimizer *opt);

/**
 * Creates a session driven by a new CSA optimizer.
 */
enum AtStatus at_session_new(double lower,
                             double upper,
                             uintptr_t ignore,
                             uintptr_t dim,
                             uintptr_t num_opt,
                             uintptr_t max_iter,
                             uint64_t seed,
                             bool integer_points,
                             struct AtSession **out);

/**
 * Creates a session adopting `opt`. Ownership of `opt` passes to the
 * library even when this call fails; do not free it afterwards.
 */
enum AtStatus at_session_with_optimizer(double lower,
                                        double upper,
                                        uintptr_t ignore,
                                        struct AtOptimizer *opt,
                                        bool integer_points,
                                        struct AtSession **out);

void at_session_free(struct AtSession *session);

bool at_session_is_finished(const struct AtSession *session);

/**
 * Target executions measured while tuning.
 */
uint64_t at_session_target_execs(const struct AtSession *session);

enum AtStatus at_session_reset(struct AtSession *session, int level);

/**
 * Opens a measured section and writes the point to use.
 */
enum AtStatus at_session_start_int(struct AtSession *session, int *point, uintptr_t len);

enum AtStatus at_session_start_double(struct AtSession *session, double *point, uintptr_t len);

/**
 * Closes the measured section; its duration becomes the cost.
 */
enum AtStatus at_session_end(struct AtSession *session);

/**
 * Feeds `cost` for the previously returned point and writes the next one.
 */
enum AtStatus at_session_exec_int(struct AtSession *session,
                                  int *point,
                                  uintptr_t len,
                                  double cost);

enum AtStatus at_session_exec_double(struct AtSession *session,
                                     double *point,
                                     uintptr_t len,
                                     double cost);

/**
 * Tunes to completion, timing each call of `target`, and leaves the final
 * point in `point`.
 */
enum AtStatus at_session_entire_exec_runtime_int(struct AtSession *session,
                                                 int *point,
                                                 uintptr_t len,
                                                 AtRuntimeTargetInt target,
                                                 void *user_data);

enum AtStatus at_session_entire_exec_runtime_double(struct AtSession *session,
                                                    double *point,
                                                    uintptr_t len,
                                                    AtRuntimeTargetDouble target,
                                                    void *user_data);

/**
 * One timed tuning step; after tuning ends `target` runs untimed with the
 * final point.
 */
enum AtStatus at_session_single_exec_runtime_int(struct AtSession *session,
                                                 int *point,
                                                 uintptr_t len,
                                                 AtRuntimeTargetInt target,
                                                 void *user_data);

enum AtStatus at_session_single_exec_runtime_double(struct AtSession *session,
                                                    double *point,
                                                    uintptr_t len,
                                                    AtRuntimeTargetDouble target,
                                                    void *user_data);

/**
 * Tunes to completion using the cost reported by `target`.
 */
enum AtStatus at_session_entire_exec_int(struct AtSession *session,
                                         int *point,
                                         uintptr_t len,
                                         AtCostTargetInt target,
                                         void *user_data);

enum AtStatus at_session_entire_exec_double(struct AtSession *session,
                                            double *point,
                                            uintptr_t len,
                                            AtCostTargetDouble target,
                                            void *user_data);

/**
 * One tuning step using the cost reported by `target`, which is also
 * written to `cost_out` when non-null.
 */
enum AtStatus at_session_single_exec_int(struct AtSession *session,
                                         int *point,
                                         uintptr_t len,
                                         AtCostTargetInt target,
                                         void *user_data,
                                         double *cost_out);

enum AtStatus at_session_single_exec_double(struct AtSession *session,
                                            double *point,
                                            uintptr_t len,
                                            AtCostTargetDouble target,
                                            void *user_data,
                                            double *cost_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AUTOTUNE_H */
