#ifndef HMM_FORGET_H
#define HMM_FORGET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HfStatus {
  HF_STATUS_OK = 0,
  HF_STATUS_NULL_POINTER = 1,
  HF_STATUS_INVALID_INPUT = 2,
  HF_STATUS_CONFIG = 3,
  /**
   * Degenerate filter, non-certifiable set, failed precondition or coverage.
   */
  HF_STATUS_NUMERICAL = 4,
  HF_STATUS_TOO_LARGE = 5,
  HF_STATUS_IO = 6,
  HF_STATUS_BUFFER_TOO_SMALL = 7,
  HF_STATUS_PANIC = 8,
} HfStatus;

/**
 * A grid filter and its current state.
 */
typedef struct HfFilter HfFilter;

/**
 * A validated model.
 */
typedef struct HfModel HfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t hf_last_error(char *buf, size_t len);

/**
 * Builds a model from a configuration document with a `[model]` section.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out_model` must be writable.
 */
enum HfStatus hf_model_from_toml(const char *toml, struct HfModel **out_model);

/**
 * # Safety
 * `model` must be null or a handle from [`hf_model_from_toml`] not yet freed.
 */
void hf_model_free(struct HfModel *model);

/**
 * Transition density `q(x, x_next)`; for finite models the matrix entry.
 *
 * # Safety
 * `model` must be a live handle and `value` writable.
 */
enum HfStatus hf_transition_density(const struct HfModel *model,
                                    double x,
                                    double x_next,
                                    double *value);

/**
 * Likelihood `g(x, y)`.
 *
 * # Safety
 * `model` must be a live handle and `value` writable.
 */
enum HfStatus hf_likelihood(const struct HfModel *model, double x, double y, double *value);

/**
 * Drift function `V(x)`.
 *
 * # Safety
 * `model` must be a live handle and `value` writable.
 */
enum HfStatus hf_drift(const struct HfModel *model, double x, double *value);

/**
 * Starts a filter from unnormalized initial masses (`len` = grid cells, or states
 * for finite models, whose grid arguments are ignored) and the first observation.
 *
 * # Safety
 * `model` must be a live handle, `init` must hold `len` doubles, `out_filter` writable.
 */
enum HfStatus hf_filter_new(const struct HfModel *model,
                            double grid_lo,
                            double grid_hi,
                            size_t grid_m,
                            const double *init,
                            size_t len,
                            double y0,
                            struct HfFilter **out_filter);

/**
 * Advances the filter by one observation.
 *
 * # Safety
 * `filter` must be a live handle.
 */
enum HfStatus hf_filter_step(struct HfFilter *filter, double y);

/**
 * Number of support points.
 *
 * # Safety
 * `filter` must be a live handle and `len` writable.
 */
enum HfStatus hf_filter_len(const struct HfFilter *filter, size_t *len);

/**
 * Writes the normalized filter weights; `len` must be at least [`hf_filter_len`].
 *
 * # Safety
 * `filter` must be a live handle and `weights` must hold `len` doubles.
 */
enum HfStatus hf_filter_weights(const struct HfFilter *filter, double *weights, size_t len);

/**
 * Accumulated log normalizing constant and current step.
 *
 * # Safety
 * `filter` must be a live handle; `log_z` and `step` writable.
 */
enum HfStatus hf_filter_log_z(const struct HfFilter *filter, double *log_z, size_t *step);

/**
 * Total-variation distance between two filters on the same support.
 *
 * # Safety
 * Both filters must be live handles and `tv` writable.
 */
enum HfStatus hf_filter_tv(const struct HfFilter *a, const struct HfFilter *b, double *tv);

/**
 * # Safety
 * `filter` must be null or a handle from [`hf_filter_new`] not yet freed.
 */
void hf_filter_free(struct HfFilter *filter);

/**
 * `1 - (eps_minus / eps_plus)^2`.
 *
 * # Safety
 * `rho` must be writable.
 */
enum HfStatus hf_rho(double eps_minus, double eps_plus, double *rho);

/**
 * Certified local Doeblin constants of `[lo, hi]` (continuous models).
 *
 * # Safety
 * `model` must be a live handle; `eps_minus` and `eps_plus` writable.
 */
enum HfStatus hf_certify_ld_interval(const struct HfModel *model,
                                     double lo,
                                     double hi,
                                     size_t m_probe,
                                     double *eps_minus,
                                     double *eps_plus);

/**
 * Runs filters from two initial mass vectors over `obs` and writes the distance
 * at every step into `tv` (`n_obs` doubles).
 *
 * # Safety
 * `nu`, `nu_prime` must hold `len` doubles, `obs` and `tv` `n_obs` doubles.
 */
enum HfStatus hf_run_two_filters_tv(const struct HfModel *model,
                                    double grid_lo,
                                    double grid_hi,
                                    size_t grid_m,
                                    const double *nu,
                                    const double *nu_prime,
                                    size_t len,
                                    const double *obs,
                                    size_t n_obs,
                                    double *tv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HMM_FORGET_H */
