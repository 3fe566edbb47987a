#ifndef ZENO_H
#define ZENO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  ZENO_STATUS_OK = 0,
  ZENO_STATUS_NULL_POINTER = 1,
  ZENO_STATUS_INVALID_PARAMS = 2,
  ZENO_STATUS_IMAGINARY_NUTATION = 3,
  ZENO_STATUS_BUFFER_TOO_SMALL = 4,
  ZENO_STATUS_INSUFFICIENT_DATA = 5,
  ZENO_STATUS_OUT_OF_BRANCH = 6,
  ZENO_STATUS_DUPLICATE_N = 7,
  ZENO_STATUS_DEGENERATE_DAMPING = 8,
  ZENO_STATUS_NON_INVERTIBLE = 9,
  ZENO_STATUS_INDEX_OUT_OF_RANGE = 10,
  ZENO_STATUS_PANIC = 11,
} ZenoStatus;

typedef enum {
  ZENO_MODE_MARKOV = 0,
  ZENO_MODE_BLOCH = 1,
} ZenoMode;

/**
 * Simulated telegraph records.
 */
typedef struct ZenoEnsemble ZenoEnsemble;

/**
 * Experiment parameters; frequencies in rad/s, rates in 1/s, durations in s.
 */
typedef struct {
  double rabi_frequency;
  double detuning;
  double drive_duration;
  double inversion_decay_rate;
  double drive_phase_diffusion_rate;
  double probe_duration;
  double ground_branching_factor;
  double metastable_mixing_factor;
  uint64_t measurements_per_trajectory;
  uint32_t pulses_per_measurement;
} ZenoParams;

typedef struct {
  double omega_tau;
  double a;
  double b;
  double theta;
  uint64_t integer_turns;
  double fractional_phase;
  double b0;
  double b1;
  double p0;
  double p1;
  bool below_validity;
} ZenoRates;

typedef struct {
  double value;
  double standard_error;
} ZenoEstimate;

typedef struct {
  ZenoEstimate repeat_on;
  ZenoEstimate repeat_off;
  ZenoEstimate total_relaxation;
  ZenoEstimate fractional_phase;
  ZenoEstimate mixing;
  bool phase_ambiguous;
} ZenoFit;

typedef struct {
  ZenoEstimate delta_b;
  ZenoEstimate ratio;
} ZenoDeltaB;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *zeno_last_error_message(void);

/**
 * # Safety
 * `out` must be null or point to writable memory for one `ZenoParams`.
 */
ZenoStatus zeno_params_default(ZenoParams *out);

/**
 * Rates for one measurement cycle of `params.pulses_per_measurement` pulses.
 *
 * # Safety
 * `params` and `out` must be null or valid for reads and writes respectively.
 */
ZenoStatus zeno_derive_rates(const ZenoParams *params, ZenoRates *out);

/**
 * Simulates `count` trajectories. On success `*out` receives a new handle.
 *
 * # Safety
 * `params` must be valid for reads and `out` valid for writes.
 */
ZenoStatus zeno_ensemble_simulate(const ZenoParams *params,
                                  ZenoMode mode,
                                  size_t count,
                                  uint64_t master_seed,
                                  ZenoEnsemble **out);

/**
 * # Safety
 * `ensemble` must be null or a handle from [`zeno_ensemble_simulate`] not yet freed.
 */
void zeno_ensemble_free(ZenoEnsemble *ensemble);

/**
 * Number of trajectories; 0 for a null handle.
 *
 * # Safety
 * `ensemble` must be null or a live handle.
 */
size_t zeno_ensemble_len(const ZenoEnsemble *ensemble);

/**
 * Copies the outcomes of trajectory `index` into `buffer` as bytes 0 (on) / 1 (off).
 *
 * `*written` receives the trajectory length, also when the buffer is too small.
 *
 * # Safety
 * `ensemble` must be a live handle, `buffer` valid for `capacity` bytes, `written` valid for writes.
 */
ZenoStatus zeno_ensemble_outcomes(const ZenoEnsemble *ensemble,
                                  size_t index,
                                  uint8_t *buffer,
                                  size_t capacity,
                                  size_t *written);

/**
 * Fits repeat probabilities, relaxation, θ′ and f₁ from an ensemble.
 *
 * # Safety
 * `ensemble` must be a live handle and `out` valid for writes.
 */
ZenoStatus zeno_ensemble_fit(const ZenoEnsemble *ensemble, ZenoFit *out);

/**
 * Expanded per-pulse phase difference δ_mn.
 *
 * # Safety
 * `out` must be valid for writes.
 */
ZenoStatus zeno_model_delta(double omega_tau,
                            double a,
                            double b_n,
                            double delta_b,
                            uint32_t m,
                            uint32_t n,
                            double *out);

/**
 * δb from δ₂₁ and δ_m1. `m = 0` takes δ_m1 as its m → ∞ limit.
 *
 * # Safety
 * `out` must be valid for writes.
 */
ZenoStatus zeno_estimate_delta_b(ZenoEstimate delta_21,
                                 ZenoEstimate delta_m1,
                                 double covariance,
                                 ZenoEstimate a_minus_b1,
                                 uint32_t m,
                                 ZenoDeltaB *out);

/**
 * cos^{2N}(ΩT/2N); NaN when `projections` is 0.
 */
double zeno_ideal_zeno_survival(double total_angle, uint64_t projections);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ZENO_H */
