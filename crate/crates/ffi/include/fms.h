#ifndef FMS_H
#define FMS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Signal selected by [`fms_simulation_copy`].
typedef enum FmsChannel {
  FMS_CHANNEL_TIME = 0,
  FMS_CHANNEL_PX = 1,
  FMS_CHANNEL_PY = 2,
  FMS_CHANNEL_PZ = 3,
  FMS_CHANNEL_DETECTED = 4,
} FmsChannel;

typedef enum FmsStatus {
  FMS_STATUS_OK = 0,
  FMS_STATUS_NULL_POINTER = 1,
  FMS_STATUS_INVALID_ARGUMENT = 2,
  FMS_STATUS_INVALID_CONFIG = 3,
  FMS_STATUS_NUMERIC_FAILURE = 4,
  FMS_STATUS_IO = 5,
  FMS_STATUS_BUFFER_TOO_SMALL = 6,
  FMS_STATUS_PANIC = 7,
} FmsStatus;

typedef enum FmsWindow {
  FMS_WINDOW_RECTANGULAR = 0,
  FMS_WINDOW_HANN = 1,
  FMS_WINDOW_BLACKMAN = 2,
} FmsWindow;

// Opaque experiment configuration.
typedef struct FmsConfig FmsConfig;

// Opaque simulation result.
typedef struct FmsSimulation FmsSimulation;

// Opaque spectrum.
typedef struct FmsSpectrum FmsSpectrum;

// Per-run figures; NaN where a figure could not be measured.
typedef struct FmsRunSummary {
  double fitted_rate;
  double maser_freq;
  double carrier_amplitude;
  double sideband_amplitude;
} FmsRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Owned by the
// library; valid until the next failing call on the same thread.
const char *fms_last_error(void);

void fms_clear_error(void);

// Library version as a static NUL-terminated string.
const char *fms_version(void);

// Releases a string returned by this library.
void fms_string_free(char *s);

// Default configuration. Never null.
struct FmsConfig *fms_config_new(void);

// Named configuration (`damping`, `transient`, `stationary`, `driven`, `free-decay`).
enum FmsStatus fms_config_preset(const char *name, struct FmsConfig **out);

// Parses a JSON configuration; missing fields take their defaults.
enum FmsStatus fms_config_from_json(const char *json, struct FmsConfig **out);

// JSON text of the configuration; release with [`fms_string_free`].
char *fms_config_to_json(const struct FmsConfig *cfg);

// Sets a numeric field by name, e.g. `"duration"`.
enum FmsStatus fms_config_set(struct FmsConfig *cfg, const char *key, double value);

// Reads a numeric field by name.
enum FmsStatus fms_config_get(const struct FmsConfig *cfg, const char *key, double *out);

// Sets the feedback gain that gives damping time `td` seconds.
enum FmsStatus fms_config_set_damping_time(struct FmsConfig *cfg, double td);

// `FMS_STATUS_OK` if the configuration is valid, otherwise
// `FMS_STATUS_INVALID_CONFIG` with every violation in the error message.
enum FmsStatus fms_config_validate(const struct FmsConfig *cfg);

void fms_config_free(struct FmsConfig *cfg);

// Integrates the configuration.
enum FmsStatus fms_simulate(const struct FmsConfig *cfg, struct FmsSimulation **out);

// Number of output samples; 0 for a null handle.
size_t fms_simulation_len(const struct FmsSimulation *sim);

// Output sample spacing, s; NaN for a null handle.
double fms_simulation_dt(const struct FmsSimulation *sim);

// Copies one channel (an `FmsChannel` value) into `buf`, which must hold
// [`fms_simulation_len`] values.
enum FmsStatus fms_simulation_copy(const struct FmsSimulation *sim,
                                   int32_t channel,
                                   double *buf,
                                   size_t len);

// Standard per-run analysis of a simulation.
enum FmsStatus fms_simulation_summary(const struct FmsSimulation *sim, struct FmsRunSummary *out);

void fms_simulation_free(struct FmsSimulation *sim);

// Single-sided amplitude spectrum of `n` samples spaced `dt` seconds,
// tapered by `window` (an `FmsWindow` value) and zero-padded by `pad`.
enum FmsStatus fms_amplitude_spectrum(const double *values,
                                      size_t n,
                                      double dt,
                                      int32_t window,
                                      size_t pad,
                                      struct FmsSpectrum **out);

size_t fms_spectrum_len(const struct FmsSpectrum *spec);

// Copies frequencies and values; either buffer may be null to skip it.
enum FmsStatus fms_spectrum_copy(const struct FmsSpectrum *spec,
                                 double *freqs,
                                 double *values,
                                 size_t len);

// Interpolated peak within `half_width` Hz of `freq`.
enum FmsStatus fms_spectrum_peak(const struct FmsSpectrum *spec,
                                 double freq,
                                 double half_width,
                                 double *peak_freq,
                                 double *peak_amplitude);

void fms_spectrum_free(struct FmsSpectrum *spec);

// Bessel function of the first kind, integer order.
double fms_bessel_j(int64_t n, double x);

// Modulation index `|gamma| b_ac / nu_ac` for xenon-129.
enum FmsStatus fms_modulation_index(double b_ac, double nu_ac, double *out);

// Number of sideband lines above `threshold` of the tallest for a drive.
enum FmsStatus fms_sideband_count(double b_ac, double nu_ac, double threshold, size_t *out);

// Field sensitivity `noise nu / kappa`, T/sqrt(Hz).
enum FmsStatus fms_field_sensitivity(double noise, double kappa, double nu, double *out);

// Coupling limit after `t_m` seconds of integration.
enum FmsStatus fms_coupling_limit(double sensitivity, double t_m, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FMS_H */
