#ifndef DECAY_H
#define DECAY_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum DecayStatus {
  DECAY_STATUS_OK = 0,
  DECAY_STATUS_NULL_POINTER = 1,
  DECAY_STATUS_INVALID_ARGUMENT = 2,
  DECAY_STATUS_NUMERIC_FAILURE = 3,
} DecayStatus;

/**
 * Opaque spectral-density handle; create with the constructors below
 * and release with `decay_density_free`.
 */
typedef struct DecayDensity DecayDensity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Truncated Breit-Wigner density with resonance `e0`, width `gamma0`,
 * and threshold `emin`.
 */
enum DecayStatus decay_density_breit_wigner(double e0,
                                            double gamma0,
                                            double emin,
                                            struct DecayDensity **out);

/**
 * Linear-onset density `(E - emin) exp(-(E - emin)/scale) / scale^2`.
 */
enum DecayStatus decay_density_linear_onset(double emin, double scale, struct DecayDensity **out);

/**
 * Release a density handle. Passing NULL is a no-op.
 */
void decay_density_free(struct DecayDensity *d);

/**
 * Density value `omega(E)`.
 */
enum DecayStatus decay_density_value(const struct DecayDensity *d, double e, double *out);

/**
 * Survival amplitude `a(t)`; real and imaginary parts written to the
 * output pointers.
 */
enum DecayStatus decay_survival_amplitude(const struct DecayDensity *d,
                                          double t,
                                          double *out_re,
                                          double *out_im);

/**
 * Survival probability `P(t) = |a(t)|^2`.
 */
enum DecayStatus decay_survival_probability(const struct DecayDensity *d, double t, double *out);

/**
 * Effective Hamiltonian `h(t) = i adot/a`. `out_trusted` is 1 where the
 * value is reliable, 0 in the near-zero transition region.
 */
enum DecayStatus decay_effective_hamiltonian(const struct DecayDensity *d,
                                             double t,
                                             double *out_re,
                                             double *out_im,
                                             int32_t *out_trusted);

/**
 * Crossover time where the exponential and background amplitude parts
 * balance.
 */
enum DecayStatus decay_transition_time(const struct DecayDensity *d, double *out);

/**
 * Power-law exponent of `P(t)` fitted over `[t_lo, t_hi]`.
 */
enum DecayStatus decay_tail_exponent(const struct DecayDensity *d,
                                     double t_lo,
                                     double t_hi,
                                     double *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *decay_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DECAY_H */
