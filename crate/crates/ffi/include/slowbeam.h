#ifndef SLOWBEAM_H
#define SLOWBEAM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_ARGUMENT = 2,
  SB_STATUS_CONFIG = 3,
  SB_STATUS_IO = 4,
  SB_STATUS_NUMERICAL = 5,
  SB_STATUS_PANIC = 6,
} SbStatus;

/**
 * Resolved run configuration.
 */
typedef struct SbConfig SbConfig;

/**
 * Cavity-cooling evolution at one power.
 */
typedef struct SbCoolingRun SbCoolingRun;

/**
 * Trajectory ensemble at one power.
 */
typedef struct SbFocusRun SbFocusRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *sb_last_error(void);

/**
 * Library version string, static.
 */
const char *sb_version(void);

/**
 * Potential depth in J for volumetric polarizability `alpha_vol` (m³),
 * power (W) and waist (m).
 *
 * # Safety
 * `out` must be valid for one `double` write.
 */
enum SbStatus sb_dipole_potential_depth(double alpha_vol, double power, double waist, double *out);

/**
 * Photons absorbed at the focus during `tau` seconds.
 *
 * # Safety
 * `out` must be valid for one `double` write.
 */
enum SbStatus sb_photons_absorbed(double power,
                                  double sigma_abs,
                                  double tau,
                                  double waist,
                                  double wavelength,
                                  double *out);

/**
 * Power (W) whose potential depth equals `e_kin` (J).
 *
 * # Safety
 * `out` must be valid for one `double` write.
 */
enum SbStatus sb_stopping_power(double e_kin, double alpha_vol, double waist, double *out);

/**
 * Speed change (m/s) of a particle at `v` crossing a potential of depth `u` (J).
 *
 * # Safety
 * `out` must be valid for one `double` write.
 */
enum SbStatus sb_pulsed_deceleration(double v, double u, double mass, double *out);

/**
 * Largest transverse speed (m/s) held by a well of depth `u` (J).
 *
 * # Safety
 * `out` must be valid for one `double` write.
 */
enum SbStatus sb_transverse_capture_speed(double u, double mass, double *out);

/**
 * Photons absorbed on a diametral transit of a continuous focus.
 *
 * # Safety
 * `out` must be valid for one `double` write.
 */
enum SbStatus sb_transit_photon_dose(double power,
                                     double waist,
                                     double v,
                                     double sigma_abs,
                                     double wavelength,
                                     double *out);

/**
 * Most probable speed of an effusive source, m/s.
 *
 * # Safety
 * `out` must be valid for one `double` write.
 */
enum SbStatus sb_effusive_speed(double mass, double temperature, double *out);

/**
 * All-defaults configuration. Never null.
 */
struct SbConfig *sb_config_default(void);

/**
 * Parse TOML configuration text.
 *
 * # Safety
 * `text` must be a nul-terminated string; `out` valid for one pointer write.
 */
enum SbStatus sb_config_parse(const char *text, struct SbConfig **out);

/**
 * Load a configuration file.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` valid for one pointer write.
 */
enum SbStatus sb_config_load(const char *path, struct SbConfig **out);

/**
 * # Safety
 * `config` must come from this library or be null.
 */
enum SbStatus sb_config_set_seed(struct SbConfig *config, uint64_t seed);

/**
 * Resolved configuration as TOML; release with [`sb_string_free`].
 *
 * # Safety
 * `config` must come from this library or be null.
 */
char *sb_config_to_toml(const struct SbConfig *config);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void sb_string_free(char *s);

/**
 * # Safety
 * `config` must come from this library or be null; it is invalid afterwards.
 */
void sb_config_free(struct SbConfig *config);

/**
 * Run the `[focus]` ensemble at `power` W; 0 gives the field-free baseline.
 *
 * # Safety
 * `config` must come from this library; `out` valid for one pointer write.
 */
enum SbStatus sb_focus_run(const struct SbConfig *config, double power, struct SbFocusRun **out);

/**
 * # Safety
 * `run` must come from this library or be null.
 */
size_t sb_focus_particles(const struct SbFocusRun *run);

/**
 * # Safety
 * `run` must come from this library; `out` valid for one `double` write.
 */
enum SbStatus sb_focus_hit_fraction(const struct SbFocusRun *run, double *out);

/**
 * Final velocity of particle `index` into `out[0..3]`.
 *
 * # Safety
 * `run` must come from this library; `out` valid for three `double` writes.
 */
enum SbStatus sb_focus_final_velocity(const struct SbFocusRun *run, size_t index, double *out);

/**
 * Hit count ratio of `with_field` over `baseline`.
 *
 * # Safety
 * Both runs must come from this library; `out` valid for one `double` write.
 */
enum SbStatus sb_focus_gain(const struct SbFocusRun *with_field,
                            const struct SbFocusRun *baseline,
                            double *out);

/**
 * # Safety
 * `run` must come from this library or be null; it is invalid afterwards.
 */
void sb_focus_free(struct SbFocusRun *run);

/**
 * Evolve the `[cooling]` ensemble at `power` W.
 *
 * # Safety
 * `config` must come from this library; `out` valid for one pointer write.
 */
enum SbStatus sb_cooling_run(const struct SbConfig *config,
                             double power,
                             struct SbCoolingRun **out);

/**
 * Number of recorded trace samples.
 *
 * # Safety
 * `run` must come from this library or be null.
 */
size_t sb_cooling_trace_len(const struct SbCoolingRun *run);

/**
 * Trace sample `index`: time (s), mean kinetic energy (J), photon number
 * and order parameter. Any output pointer may be null.
 *
 * # Safety
 * `run` must come from this library; non-null outputs valid for one write.
 */
enum SbStatus sb_cooling_trace_sample(const struct SbCoolingRun *run,
                                      size_t index,
                                      double *t,
                                      double *ke,
                                      double *photons,
                                      double *theta);

/**
 * Late-time mean kinetic energy over the initial one.
 *
 * # Safety
 * `run` must come from this library; `out` valid for one `double` write.
 */
enum SbStatus sb_cooling_ke_ratio(const struct SbCoolingRun *run, double *out);

/**
 * # Safety
 * `run` must come from this library or be null; it is invalid afterwards.
 */
void sb_cooling_free(struct SbCoolingRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLOWBEAM_H */
