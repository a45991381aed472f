#ifndef METROTREE_H
#define METROTREE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum MtStatus {
  MtStatus_Ok = 0,
  MtStatus_NullArgument = 1,
  MtStatus_InvalidLaw = 2,
  MtStatus_InvalidArgument = 3,
  MtStatus_GrowthConditionFailed = 4,
  MtStatus_InsufficientData = 5,
} MtStatus;

/**
 * Opaque edge-mark law handle.
 */
typedef struct MtLaw MtLaw;

/**
 * Growth-condition report: the minimum of the log-Laplace functional
 * and its location.
 */
typedef struct MtLambdaReport {
  double beta_star;
  double lambda_min;
  /**
   * 1 if the minimum is strictly positive.
   */
  int32_t satisfies_growth;
} MtLambdaReport;

/**
 * Point estimate with a standard error.
 */
typedef struct MtEstimate {
  double value;
  double stderr;
  uint64_t n_units;
} MtEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a two-point law on {+1, -1} with P(X = 1) = p. Returns a
 * handle through `out`; free it with `mt_law_free`.
 */
enum MtStatus mt_law_two_point(double p, struct MtLaw **out);

/**
 * Creates a centered shifted-binomial law on {-n, -n+2, ..., n}.
 */
enum MtStatus mt_law_shifted_binomial(uint32_t n, double p, struct MtLaw **out);

/**
 * Frees a law handle. Passing NULL is a no-op.
 */
void mt_law_free(struct MtLaw *law);

/**
 * The tilt parameter beta0 of the law.
 */
enum MtStatus mt_law_beta0(const struct MtLaw *law, double *out);

/**
 * Minimizes the log-Laplace functional over beta >= 0 and reports
 * whether the growth condition holds.
 */
enum MtStatus mt_check_growth(const struct MtLaw *law, uint32_t d, struct MtLambdaReport *out);

/**
 * Predicted branching random walk extreme speed; `direction` is 0 for
 * the maximum, 1 for the minimum.
 */
enum MtStatus mt_brw_speed(const struct MtLaw *law, uint32_t d, uint32_t direction, double *out);

/**
 * Runs replicas, cuts regeneration blocks and estimates the speed
 * `sum(dS) / sum(dtau)`. `h` is 0 for metropolis, 1 for barker.
 */
enum MtStatus mt_simulate_speed(const struct MtLaw *law,
                                uint32_t d,
                                uint32_t h,
                                double beta,
                                uint64_t n_steps,
                                uint32_t n_replicas,
                                uint64_t seed,
                                uint32_t buffer_w,
                                uint64_t min_blocks,
                                struct MtEstimate *out);

/**
 * Same as `mt_simulate_speed` but estimates the asymptotic variance
 * `sum(dS^2) / sum(dtau)` at beta = 0.
 */
enum MtStatus mt_simulate_sigma2(const struct MtLaw *law,
                                 uint32_t d,
                                 uint32_t h,
                                 uint64_t n_steps,
                                 uint32_t n_replicas,
                                 uint64_t seed,
                                 uint32_t buffer_w,
                                 uint64_t min_blocks,
                                 struct MtEstimate *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* METROTREE_H */
