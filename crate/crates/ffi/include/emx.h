#ifndef EMX_H
#define EMX_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by all functions.
 */
typedef enum {
  EMX_STATUS_OK = 0,
  EMX_STATUS_NULL_POINTER = 1,
  EMX_STATUS_INVALID_PARAMETER = 2,
  EMX_STATUS_SINGULAR = 3,
  EMX_STATUS_INVALID_TRACE = 4,
  EMX_STATUS_INTEGRATION = 5,
  EMX_STATUS_FIT_FAILED = 6,
  EMX_STATUS_PARSE = 7,
  EMX_STATUS_CONFIG = 8,
  EMX_STATUS_IO = 9,
  EMX_STATUS_NOT_FOUND = 10,
  EMX_STATUS_PANIC = 11,
} EmxStatus;

/**
 * Opaque device handle.
 */
typedef struct EmxDevice EmxDevice;

/**
 * Opaque fit result.
 */
typedef struct EmxFitReport EmxFitReport;

/**
 * Device parameters, all rates and frequencies in Hz.
 */
typedef struct {
  double omega_r0_hz;
  double coupling_j_hz;
  double kappa_plus_hz;
  double kappa_minus_hz;
  double kappa_e_plus_hz;
  double kappa_e_minus_hz;
  double n_bath_plus;
  double omega_m_hz;
  double gamma_i_hz;
  double n_bath_m;
} EmxDeviceParams;

/**
 * Pulsed-heating model parameters; rates in Hz.
 */
typedef struct {
  double gamma_i_hz;
  double gamma_em_hz;
  double gamma_p_hz;
  double n_bath_m;
  double n_p;
  double delta_b;
  double gamma_s_hz;
} EmxHeatingParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into the library from the same thread.
 */
const char *emx_last_error(void);

/**
 * Fill `out` with the reference device.
 *
 * # Safety
 * `out` must be NULL or point to writable memory for one `EmxDeviceParams`.
 */
EmxStatus emx_device_default_params(EmxDeviceParams *out);

/**
 * Validate `params` and allocate a device. Release with [`emx_device_free`].
 *
 * # Safety
 * `params` must point to a valid `EmxDeviceParams`; `out` must be writable.
 */
EmxStatus emx_device_new(const EmxDeviceParams *params, EmxDevice **out);

/**
 * # Safety
 * `dev` must be NULL or a handle from [`emx_device_new`] not yet freed.
 */
void emx_device_free(EmxDevice *dev);

/**
 * Reflection `S11` of the even supermode at `n` probe offsets from it (Hz),
 * for enhanced coupling `coupling_hz` and drive detuning
 * `omega_plus - omega_d` of `drive_detuning_hz`. A positive
 * `jitter_fwhm_hz` averages over Gaussian frequency jitter.
 *
 * # Safety
 * `dev` must be a live handle; the arrays must hold `n` elements.
 */
EmxStatus emx_s11(const EmxDevice *dev,
                  double coupling_hz,
                  double drive_detuning_hz,
                  double jitter_fwhm_hz,
                  const double *probe_offsets_hz,
                  size_t n,
                  double *out_re,
                  double *out_im);

/**
 * Output noise spectrum in vacuum units at `n` offsets from the drive (Hz).
 *
 * # Safety
 * `dev` must be a live handle; the arrays must hold `n` elements.
 */
EmxStatus emx_npsd(const EmxDevice *dev,
                   double coupling_hz,
                   double drive_detuning_hz,
                   const double *offsets_hz,
                   size_t n,
                   double *out);

/**
 * Steady-state phonon occupancy under red-sideband pumping.
 *
 * # Safety
 * `dev` must be a live handle; `out` must be writable.
 */
EmxStatus emx_occupancy(const EmxDevice *dev, double coupling_hz, double *out);

/**
 * # Safety
 * `dev` must be a live handle; `out` must be writable.
 */
EmxStatus emx_cooperativity(const EmxDevice *dev, double coupling_hz, double *out);

/**
 * Odd-mode intracavity photon number for `power_w` at the device input and a
 * drive at `drive_hz`.
 *
 * # Safety
 * `dev` must be a live handle; `out` must be writable.
 */
EmxStatus emx_photon_number(const EmxDevice *dev, double power_w, double drive_hz, double *out);

/**
 * Phonon occupancy at `n` times (s) after the pump switches on.
 *
 * # Safety
 * `params` must be valid; the arrays must hold `n` elements.
 */
EmxStatus emx_heating_curve(const EmxHeatingParams *params,
                            const double *times_s,
                            size_t n,
                            double *out);

/**
 * Fit a bare-cavity `|S11|` trace (frequencies in Hz). The report holds
 * `omega_0`, `kappa` and `kappa_e`.
 *
 * # Safety
 * The arrays must hold `n` elements; `out` must be writable.
 */
EmxStatus emx_fit_lorentzian(const double *freqs_hz,
                             const double *magnitude,
                             size_t n,
                             EmxFitReport **out);

/**
 * Fit a power ringdown (times in s). The report holds `gamma_m` in Hz.
 *
 * # Safety
 * The arrays must hold `n` elements; `out` must be writable.
 */
EmxStatus emx_fit_ringdown(const double *times_s,
                           const double *power,
                           size_t n,
                           EmxFitReport **out);

/**
 * # Safety
 * `report` must be a live handle.
 */
size_t emx_report_param_count(const EmxFitReport *report);

/**
 * Name of parameter `index`, or NULL when out of range. Owned by the report.
 *
 * # Safety
 * `report` must be a live handle.
 */
const char *emx_report_param_name(const EmxFitReport *report, size_t index);

/**
 * Value and standard error of the parameter called `name`.
 *
 * # Safety
 * `report` must be a live handle, `name` a NUL-terminated string, and
 * `value`/`stderr` writable (either may be NULL to skip it).
 */
EmxStatus emx_report_param(const EmxFitReport *report,
                           const char *name,
                           double *value,
                           double *stderr);

/**
 * True when the fit converged to a usable optimum.
 *
 * # Safety
 * `report` must be a live handle.
 */
bool emx_report_converged(const EmxFitReport *report);

/**
 * Text rendering of the report; release with [`emx_string_free`].
 *
 * # Safety
 * `report` must be a live handle.
 */
char *emx_report_to_text(const EmxFitReport *report);

/**
 * # Safety
 * `report` must be NULL or a handle not yet freed.
 */
void emx_report_free(EmxFitReport *report);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void emx_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMX_H */
