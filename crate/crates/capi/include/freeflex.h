#ifndef FREEFLEX_H
#define FREEFLEX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum FfxStatus {
  Ok = 0,
  /**
   * A pointer argument was null or otherwise unusable.
   */
  InvalidArgument = 1,
  /**
   * Configuration text failed to parse or validate.
   */
  InvalidConfig = 2,
  /**
   * The solver failed (no convergence, no pull-in below the cap, ...).
   */
  SolverFailed = 3,
  /**
   * The model rejected the inputs (bad grid, unreachable target, ...).
   */
  ModelError = 4,
  /**
   * A panic was caught at the boundary; state may be stale.
   */
  Internal = 5,
} FfxStatus;

/**
 * Electrode group selector.
 */
typedef enum FfxElectrodes {
  Internal = 0,
  External = 1,
} FfxElectrodes;

/**
 * Opaque validated device handle.
 */
typedef struct FfxDevice FfxDevice;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message of the current thread; valid until the next failing
 * call on this thread. Never null.
 */
const char *ffx_last_error(void);

/**
 * Library version as a static string.
 */
const char *ffx_version(void);

/**
 * Builds the calibrated reference switch. `gap_m` is the air gap to the
 * dielectric top, `stop_height_m` the travel to the ohmic contact surface.
 *
 * # Safety
 * `out` must be a valid pointer to an `FfxDevice*` slot.
 */
enum FfxStatus ffx_device_reference(double gap_m, double stop_height_m, struct FfxDevice **out);

/**
 * Parses a scenario TOML (the same schema the CLI reads) and returns its
 * validated device.
 *
 * # Safety
 * `toml_text` must be a valid NUL-terminated string; `out` a valid slot.
 */
enum FfxStatus ffx_device_from_toml(const char *toml_text, struct FfxDevice **out);

/**
 * Frees a device handle. Null is ignored.
 *
 * # Safety
 * `device` must come from this library and not be freed twice.
 */
void ffx_device_free(struct FfxDevice *device);

/**
 * Pull-in voltage of one electrode group; also reports the peak stable
 * displacement at onset (signed, toward the substrate negative).
 *
 * # Safety
 * `device` must be a live handle; out-pointers valid or null (skipped).
 */
enum FfxStatus ffx_find_pullin(const struct FfxDevice *device,
                               enum FfxElectrodes electrodes,
                               double v_max,
                               uint32_t n_elements,
                               double *out_v_pullin,
                               double *out_peak_displacement_m);

/**
 * Pull-out (release) voltage of one electrode group with an optional
 * internal charging offset held during the descent.
 *
 * # Safety
 * As for [`ffx_find_pullin`].
 */
enum FfxStatus ffx_find_pullout(const struct FfxDevice *device,
                                enum FfxElectrodes electrodes,
                                double v_charge_internal,
                                uint32_t n_elements,
                                double *out_v_pullout);

/**
 * Classifies the zero-drive state under an internal charging offset and,
 * when stuck, finds the external unstick voltage. `out_stuck` receives 0/1;
 * `out_v_unstick` is written only for stuck states.
 *
 * # Safety
 * As for [`ffx_find_pullin`].
 */
enum FfxStatus ffx_unstick(const struct FfxDevice *device,
                           double v_charge_internal,
                           double adhesion_n,
                           double v_ext_max,
                           uint32_t n_elements,
                           int32_t *out_stuck,
                           double *out_v_unstick);

/**
 * Closed-form lumped-circuit fit to isolation/insertion targets.
 *
 * # Safety
 * Out-pointers must be valid or null (skipped).
 */
enum FfxStatus ffx_fit_rf(double isolation_db,
                          double isolation_freq_hz,
                          double insertion_db,
                          double insertion_freq_hz,
                          double z0,
                          double *out_r_down_ohm,
                          double *out_c_up_f);

/**
 * |S21| in dB of the shunt switch at one frequency.
 * `down` selects the closed (1) or open (0) state.
 *
 * # Safety
 * `out_s21_db` must be valid or null.
 */
enum FfxStatus ffx_shunt_s21_db(double r_down_ohm,
                                double l_down_h,
                                double c_up_f,
                                double z0,
                                int32_t down,
                                double freq_hz,
                                double *out_s21_db);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FREEFLEX_H */
