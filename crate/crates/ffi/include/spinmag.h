#ifndef SPINMAG_H
#define SPINMAG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SmStatus {
  SM_STATUS_OK = 0,
  SM_STATUS_NULL_POINTER = 1,
  SM_STATUS_INVALID_INPUT = 2,
  SM_STATUS_EMPTY_BLOCK = 3,
  SM_STATUS_EIGEN_NON_CONVERGENCE = 4,
  SM_STATUS_QUADRATURE_NON_CONVERGENCE = 5,
  SM_STATUS_SINGULAR_CONFIGURATION = 6,
  SM_STATUS_UNDERSAMPLED = 7,
  SM_STATUS_PHYSICAL_BOUND = 8,
  SM_STATUS_HEURISTIC_FAILURE = 9,
  SM_STATUS_CONDITIONING = 10,
  SM_STATUS_FIT_NOT_CONVERGED = 11,
  SM_STATUS_CONFIG = 12,
  SM_STATUS_PARSE = 13,
  SM_STATUS_IO = 14,
  SM_STATUS_PANIC = 15,
} SmStatus;

typedef enum SmFrequencyMethod {
  SM_FREQUENCY_METHOD_EXACT = 0,
  SM_FREQUENCY_METHOD_APPROXIMATE = 1,
} SmFrequencyMethod;

// Fine-structure branch selector.
typedef enum SmBranch {
  SM_BRANCH_PLUS = 0,
  SM_BRANCH_ZERO = 1,
  SM_BRANCH_MINUS = 2,
} SmBranch;

typedef enum SmFitMode {
  SM_FIT_MODE_FREQUENCIES_FIXED = 0,
  SM_FIT_MODE_FREQUENCIES_FREE = 1,
} SmFitMode;

// Diagonalized spectrum at one (N, B).
typedef struct SmSpectrum SmSpectrum;

// Uniformly sampled time series.
typedef struct SmWaveform SmWaveform;

// Precession frequencies (rad/s).
typedef struct SmFrequencies {
  double omega_plus;
  double omega_minus;
} SmFrequencies;

// Damped two-frequency model parameters (V·s, s, rad/s, rad/s).
typedef struct SmModelParams {
  double amplitude;
  double tau;
  double omega_plus;
  double omega_minus;
} SmModelParams;

// Fit outcome. Frequency uncertainties are NaN when frequencies were held fixed.
typedef struct SmFitResult {
  struct SmModelParams params;
  struct SmModelParams sigma;
  double residual_rms;
  size_t iterations;
  bool converged;
} SmFitResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len`). Returns the full message length excluding the NUL,
// or 0 when there is no pending error.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t sm_last_error_message(char *buf, size_t len);

// Precession frequencies of the ¹⁶O₂ level `n` in field `b_tesla`.
//
// # Safety
// `result` must be null or valid for writes.
enum SmStatus sm_frequencies(uint32_t n,
                             double b_tesla,
                             enum SmFrequencyMethod method,
                             struct SmFrequencies *result);

// Number density (m⁻³) of centrifuged molecules at the given gas conditions.
//
// # Safety
// `result` must be null or valid for writes.
enum SmStatus sm_number_density(double pressure_bar,
                                double temperature_k,
                                double eta,
                                double *result);

// Thermal population imbalance between the outer branches of level `n`.
//
// # Safety
// `result` must be null or valid for writes.
enum SmStatus sm_boltzmann_imbalance(uint32_t n, double temperature_k, double *result);

// Diagonalizes the Hamiltonian at (n, b_tesla).
//
// # Safety
// `handle` must be null or valid for writes. The returned handle is owned
// by the caller and released with [`sm_spectrum_free`].
enum SmStatus sm_spectrum_new(uint32_t n, double b_tesla, struct SmSpectrum **handle);

// # Safety
// `handle` must be null or come from [`sm_spectrum_new`], freed once.
void sm_spectrum_free(struct SmSpectrum *handle);

// Number of states, 3(2N+1).
//
// # Safety
// `handle` must be null or a live spectrum handle.
size_t sm_spectrum_total_states(const struct SmSpectrum *handle);

// Energy (J) of `branch` in block `m`.
//
// # Safety
// `handle` must be a live spectrum handle; `result` valid for writes.
enum SmStatus sm_spectrum_energy(const struct SmSpectrum *handle,
                                 enum SmBranch which,
                                 int64_t m,
                                 double *result);

// Writes all energies (J, ascending) into `buf`. `written` receives the
// total count; the call fails with `SM_STATUS_INVALID_INPUT` if `cap` is too
// small, after reporting the required size.
//
// # Safety
// `handle` must be a live spectrum handle, `buf` null or `cap` writable
// doubles, `written` valid for writes.
enum SmStatus sm_spectrum_energies(const struct SmSpectrum *handle,
                                   double *buf,
                                   size_t cap,
                                   size_t *written);

// Builds a waveform (volts) from `len` samples starting at `t0` with step `dt` (s).
//
// # Safety
// `samples` must point to `len` readable doubles; `handle` valid for writes.
// Release with [`sm_waveform_free`].
enum SmStatus sm_waveform_new(double t0,
                              double dt,
                              const double *samples,
                              size_t len,
                              struct SmWaveform **handle);

// Reads a waveform CSV file.
//
// # Safety
// `path` must be a NUL-terminated string; `handle` valid for writes.
enum SmStatus sm_waveform_read_csv(const char *path, struct SmWaveform **handle);

// Samples the damped two-frequency model on a uniform grid.
//
// # Safety
// `p` must be readable and `handle` valid for writes.
enum SmStatus sm_model_synthesize(const struct SmModelParams *p,
                                  double t0,
                                  double dt,
                                  size_t len,
                                  struct SmWaveform **handle);

// # Safety
// `handle` must be null or a waveform handle, freed once.
void sm_waveform_free(struct SmWaveform *handle);

// # Safety
// `handle` must be null or a live waveform handle.
size_t sm_waveform_len(const struct SmWaveform *handle);

// Copies up to `cap` samples into `buf`; returns the number copied.
//
// # Safety
// `handle` must be null or live; `buf` null or `cap` writable doubles.
size_t sm_waveform_samples(const struct SmWaveform *handle, double *buf, size_t cap);

// Heuristic starting values for [`sm_fit`].
//
// # Safety
// `handle` must be live; `seed` valid for writes.
enum SmStatus sm_initial_guess(const struct SmWaveform *handle, struct SmModelParams *seed);

// Least-squares fit of the damped two-frequency model. `max_iterations`
// of 0 selects the default. A fit that stops without converging still
// fills `result` and returns `SM_STATUS_FIT_NOT_CONVERGED`.
//
// # Safety
// `handle` must be live, `seed` readable, `result` valid for writes.
enum SmStatus sm_fit(const struct SmWaveform *handle,
                     const struct SmModelParams *seed,
                     enum SmFitMode mode,
                     size_t max_iterations,
                     struct SmFitResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPINMAG_H */
