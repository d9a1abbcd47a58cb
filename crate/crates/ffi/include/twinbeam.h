#ifndef TWINBEAM_H
#define TWINBEAM_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum TbStatus {
  TB_STATUS_OK = 0,
  TB_STATUS_NULL_POINTER = 1,
  TB_STATUS_VALIDATION = 2,
  TB_STATUS_DOMAIN = 3,
  TB_STATUS_UNKNOWN_MODE = 4,
  TB_STATUS_PRECONDITION = 5,
  TB_STATUS_UNDEFINED_CHARGE = 6,
  /**
   * The fit converged but missed its targets.
   */
  TB_STATUS_UNREACHABLE = 7,
  TB_STATUS_PANIC = 99,
} TbStatus;

typedef enum TbChannelFamily {
  TB_CHANNEL_FAMILY_IDEAL = 0,
  TB_CHANNEL_FAMILY_LOSS_BEFORE_GAIN = 1,
  TB_CHANNEL_FAMILY_LOSS_AFTER_GAIN = 2,
  TB_CHANNEL_FAMILY_CASCADE = 3,
} TbChannelFamily;

/**
 * Opaque gain-versus-detuning model.
 */
typedef struct TbGainCurve TbGainCurve;

/**
 * Opaque Gaussian state of a probe/conjugate pair.
 */
typedef struct TbState TbState;

/**
 * Flat channel description. Fields not used by `family` are ignored:
 * `gain` for the lumped families and ideal, `eta_*` for the lumped
 * families, `steps`, `gamma_total` and `alpha_*_total` for the cascade.
 */
typedef struct TbChannelParams {
  enum TbChannelFamily family;
  double gain;
  double eta_probe;
  double eta_conj;
  size_t steps;
  double gamma_total;
  double alpha_probe_total;
  double alpha_conj_total;
} TbChannelParams;

typedef struct TbAttenuationOptimum {
  double t_star;
  double nsf_star;
  double nsf_star_db;
  double nsf_unattenuated;
  bool dense_fallback;
} TbAttenuationOptimum;

typedef struct TbGainPair {
  double g_p;
  double g_c;
} TbGainPair;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next call into this library on the thread.
 */
const char *tb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *tb_version(void);

/**
 * Creates a vacuum probe (mode 0) and conjugate (mode 1) pair, the probe
 * carrying topological charge `probe_charge`. Free with [`tb_state_free`].
 */
enum TbStatus tb_state_new_pair(int32_t probe_charge, struct TbState **out);

enum TbStatus tb_state_clone(const struct TbState *state, struct TbState **out);

/**
 * Releases a state. Null is ignored.
 */
void tb_state_free(struct TbState *state);

/**
 * Adds the coherent amplitude `re + i·im` to `mode`.
 */
enum TbStatus tb_state_displace(struct TbState *state, size_t mode, double re, double im);

enum TbStatus tb_state_two_mode_squeeze(struct TbState *state,
                                        size_t probe,
                                        size_t conj,
                                        double gain);

/**
 * Beam-splitter loss with transmission `eta` on `mode`.
 */
enum TbStatus tb_state_loss(struct TbState *state, size_t mode, double eta);

/**
 * Propagates the state through a channel acting on `probe` and `conj`.
 */
enum TbStatus tb_state_apply_channel(struct TbState *state,
                                     const struct TbChannelParams *params,
                                     size_t probe,
                                     size_t conj);

/**
 * Mean photon flux of `mode`.
 */
enum TbStatus tb_state_flux(const struct TbState *state, size_t mode, double *out);

/**
 * Intensity-noise factor of one beam relative to its shot noise.
 */
enum TbStatus tb_state_single_beam_nsf(const struct TbState *state, size_t mode, double *out);

/**
 * Intensity-difference noise factor (linear) of two bright beams.
 */
enum TbStatus tb_state_difference_nsf(const struct TbState *state,
                                      size_t probe,
                                      size_t conj,
                                      double *out);

/**
 * Optimal probe transmission in `[t_lo, t_hi]` after detection with the
 * given quantum efficiency and electronic noise (in shot-noise units).
 */
enum TbStatus tb_optimize_attenuation(const struct TbState *state,
                                      size_t probe,
                                      size_t conj,
                                      double quantum_efficiency,
                                      double electronic_noise,
                                      double t_lo,
                                      double t_hi,
                                      struct TbAttenuationOptimum *out);

/**
 * Probe and conjugate gains of a unit seed through the channel.
 */
enum TbStatus tb_channel_gains(const struct TbChannelParams *params, struct TbGainPair *out);

/**
 * Fits a channel of `family` to the gains, and to `target_nsf` (linear)
 * unless it is NaN. `steps` is used only by the cascade. When the fit
 * misses its targets the parameters are still written and the call returns
 * `Unreachable`.
 */
enum TbStatus tb_fit_channel(double g_p,
                             double g_c,
                             double target_nsf,
                             enum TbChannelFamily family,
                             size_t steps,
                             struct TbChannelParams *out,
                             double *out_residual);

enum TbStatus tb_to_decibel(double linear, double *out);

double tb_from_decibel(double db);

/**
 * Default calibrated gain curves. Free with [`tb_gain_curve_free`].
 */
enum TbStatus tb_gain_curve_new_default(struct TbGainCurve **out);

void tb_gain_curve_free(struct TbGainCurve *curve);

/**
 * Gains at `delta_mhz`. `out_extrapolated` may be null.
 */
enum TbStatus tb_gain_curve_evaluate(const struct TbGainCurve *curve,
                                     double delta_mhz,
                                     struct TbGainPair *out,
                                     bool *out_extrapolated);

/**
 * Longest detuning interval where the total gain lies in [0.95, 1].
 * Returns `Domain` when there is none.
 */
enum TbStatus tb_gain_curve_window(const struct TbGainCurve *curve,
                                   double *out_lo_mhz,
                                   double *out_hi_mhz);

/**
 * Topological charge recovered from the phase winding of a sampled
 * Laguerre-Gaussian field (half-width `extent_um`, `resolution` pixels).
 */
enum TbStatus tb_lg_charge(int32_t l,
                           uint32_t p,
                           double waist_um,
                           double wavelength_nm,
                           double extent_um,
                           size_t resolution,
                           double radius_fraction,
                           int32_t *out);

/**
 * Fork dislocation order of the interferogram of an LG field with a tilted
 * plane wave putting `fringes` fringes across the aperture.
 */
enum TbStatus tb_fork_order(int32_t l,
                            double waist_um,
                            double wavelength_nm,
                            double extent_um,
                            size_t resolution,
                            double fringes,
                            double radius_fraction,
                            int32_t *out);

bool tb_check_oam_conservation(int32_t l_pump, int32_t l_probe, int32_t l_conj);

int32_t tb_conjugate_charge(int32_t l_pump, int32_t l_probe);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TWINBEAM_H */
