//! The vapor cell as a two-beam quantum channel.
//!
//! Three families are available: the ideal two-mode squeezer, a lumped
//! squeezer with loss placed before or after the gain, and a distributed
//! cascade that interleaves thin squeezing slices with thin absorbing slices.
//! Every family lowers to a list of [`LinearStep`]s; the covariance route
//! ([`ChannelSpec::apply`]) and the sampling oracle both consume that list.

pub mod curves;
pub mod fit;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::mc::{Beam, LinearStep, McScenario};
use crate::gaussian::{GaussianState, ModeLabel, SqueezerSpec};

pub use curves::{gain_curves, nonamplifying_window, CurveSample, DetuningWindow, GainCurveModel};
pub use fit::{fit_balanced_efficiency, fit_channel, FitFamily, FitResult};

pub const DEFAULT_CASCADE_STEPS: usize = 800;

/// Output power over seed power for each beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainPair {
    pub g_p: f64,
    pub g_c: f64,
}

impl GainPair {
    pub fn new(g_p: f64, g_c: f64) -> Result<Self> {
        if !(g_p >= 0.0 && g_c >= 0.0 && g_p.is_finite() && g_c.is_finite()) {
            return Err(Error::Validation(format!(
                "gains must be finite and non-negative, got ({g_p}, {g_c})"
            )));
        }
        Ok(Self { g_p, g_c })
    }

    pub fn sum(&self) -> f64 {
        self.g_p + self.g_c
    }

    pub fn difference(&self) -> f64 {
        self.g_p - self.g_c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossPlacement {
    LossBeforeGain,
    LossAfterGain,
}

/// Squeezer of gain `gain` with lumped per-beam transmissions.
///
/// With `LossBeforeGain` the transmissions act on the inputs; only the probe
/// input carries light, so `eta_conj` acts on vacuum and has no effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LumpedChannelSpec {
    pub gain: f64,
    pub eta_probe: f64,
    pub eta_conj: f64,
    pub placement: LossPlacement,
}

impl LumpedChannelSpec {
    pub fn validate(&self) -> Result<()> {
        SqueezerSpec { gain: self.gain }.validate()?;
        for (name, eta) in [("eta_probe", self.eta_probe), ("eta_conj", self.eta_conj)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::Domain(format!(
                    "{name} must lie in [0, 1], got {eta}"
                )));
            }
        }
        Ok(())
    }
}

/// Distributed gain and absorption split into `steps` uniform slices.
///
/// `gamma_total` is the integrated squeezing parameter: with no absorption
/// the cascade is a squeezer of gain `cosh²(gamma_total)`. Each slice
/// squeezes by `gamma_total / steps` and absorbs `exp(-alpha / steps)`;
/// absorption is split symmetrically around each squeezing slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeSpec {
    pub steps: usize,
    pub gamma_total: f64,
    pub alpha_probe_total: f64,
    pub alpha_conj_total: f64,
}

impl CascadeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Domain("cascade needs at least one step".into()));
        }
        for (name, v) in [
            ("gamma_total", self.gamma_total),
            ("alpha_probe_total", self.alpha_probe_total),
            ("alpha_conj_total", self.alpha_conj_total),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Gain of each squeezing slice.
    pub fn step_gain(&self) -> f64 {
        (self.gamma_total / self.steps as f64).cosh().powi(2)
    }

    /// Lossless gain of the whole cascade.
    pub fn lossless_gain(&self) -> f64 {
        self.gamma_total.cosh().powi(2)
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        Self { steps, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ChannelSpec {
    Ideal(SqueezerSpec),
    Lumped(LumpedChannelSpec),
    Cascade(CascadeSpec),
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ChannelSpec::Ideal(s) => s.validate(),
            ChannelSpec::Lumped(s) => s.validate(),
            ChannelSpec::Cascade(s) => s.validate(),
        }
    }

    /// Lowers the channel to elementary squeezing and loss steps.
    pub fn linear_steps(&self) -> Result<Vec<LinearStep>> {
        self.validate()?;
        let loss = |beam, eta: f64| LinearStep::Loss { beam, eta };
        Ok(match *self {
            ChannelSpec::Ideal(s) => vec![LinearStep::Squeeze { gain: s.gain }],
            ChannelSpec::Lumped(s) => {
                let sq = LinearStep::Squeeze { gain: s.gain };
                let losses = [
                    loss(Beam::Probe, s.eta_probe),
                    loss(Beam::Conjugate, s.eta_conj),
                ];
                match s.placement {
                    LossPlacement::LossBeforeGain => vec![losses[0], losses[1], sq],
                    LossPlacement::LossAfterGain => vec![sq, losses[0], losses[1]],
                }
            }
            ChannelSpec::Cascade(s) => {
                let n = s.steps as f64;
                let sq = LinearStep::Squeeze {
                    gain: s.step_gain(),
                };
                let mut half = Vec::new();
                let mut full = Vec::new();
                for (beam, alpha) in [
                    (Beam::Probe, s.alpha_probe_total),
                    (Beam::Conjugate, s.alpha_conj_total),
                ] {
                    if alpha > 0.0 {
                        half.push(loss(beam, (-alpha / (2.0 * n)).exp()));
                        full.push(loss(beam, (-alpha / n).exp()));
                    }
                }
                let mut steps = Vec::with_capacity(s.steps * (1 + full.len()) + half.len());
                steps.extend_from_slice(&half);
                for k in 0..s.steps {
                    steps.push(sq);
                    if k + 1 < s.steps {
                        steps.extend_from_slice(&full);
                    }
                }
                steps.extend_from_slice(&half);
                steps
            }
        })
    }

    /// Propagates `state` through the channel with `probe`/`conj` as the two
    /// beams.
    pub fn apply(&self, state: &GaussianState, probe: usize, conj: usize) -> Result<GaussianState> {
        let mut out = state.clone();
        for step in self.linear_steps()? {
            out = match step {
                LinearStep::Squeeze { gain } => {
                    out.two_mode_squeeze(probe, conj, SqueezerSpec { gain })?
                }
                LinearStep::Loss {
                    beam: Beam::Probe,
                    eta,
                } => out.beamsplit_loss(probe, eta)?,
                LinearStep::Loss {
                    beam: Beam::Conjugate,
                    eta,
                } => out.beamsplit_loss(conj, eta)?,
            };
        }
        Ok(out)
    }

    /// Sampling-oracle scenario for a probe seed of amplitude `seed`.
    pub fn mc_scenario(&self, seed: Complex64) -> Result<McScenario> {
        Ok(McScenario {
            seed_probe: seed,
            seed_conj: Complex64::new(0.0, 0.0),
            steps: self.linear_steps()?,
        })
    }

    /// Gains of a unit coherent probe seed: output coherent flux over input
    /// flux for each beam.
    pub fn gains(&self) -> Result<GainPair> {
        // Only the mean field matters here, so amplitudes are pushed through
        // the steps directly.
        let mut a = Complex64::new(1.0, 0.0);
        let mut b = Complex64::new(0.0, 0.0);
        for step in self.linear_steps()? {
            match step {
                LinearStep::Squeeze { gain } => {
                    let g = gain.sqrt();
                    let h = (gain - 1.0).sqrt();
                    (a, b) = (g * a + h * b.conj(), g * b + h * a.conj());
                }
                LinearStep::Loss {
                    beam: Beam::Probe,
                    eta,
                } => a *= eta.sqrt(),
                LinearStep::Loss {
                    beam: Beam::Conjugate,
                    eta,
                } => b *= eta.sqrt(),
            }
        }
        GainPair::new(a.norm_sqr(), b.norm_sqr())
    }
}

/// Lumped squeezer with loss, applied to the beams `probe` and `conj`.
pub fn apply_lumped_channel(
    state: &GaussianState,
    probe: usize,
    conj: usize,
    spec: LumpedChannelSpec,
) -> Result<GaussianState> {
    ChannelSpec::Lumped(spec).apply(state, probe, conj)
}

pub fn apply_cascade(
    state: &GaussianState,
    probe: usize,
    conj: usize,
    spec: CascadeSpec,
) -> Result<GaussianState> {
    ChannelSpec::Cascade(spec).apply(state, probe, conj)
}

pub fn channel_gains(spec: &ChannelSpec) -> Result<GainPair> {
    spec.gains()
}

/// Probe/conjugate pair with a coherent seed of amplitude `seed` on the
/// probe. The conjugate carries the opposite topological charge of the
/// probe (pump charge zero).
pub fn seeded_pair(seed: Complex64, probe_charge: i32) -> Result<(GaussianState, usize, usize)> {
    let probe = ModeLabel::new(0, crate::gaussian::ModeRole::Probe, probe_charge);
    let conj = ModeLabel::new(1, crate::gaussian::ModeRole::Conjugate, -probe_charge);
    let state = GaussianState::vacuum(&[probe, conj])?.displace(0, seed)?;
    Ok((state, 0, 1))
}

/// Metadata describing the operating point. Carried into output files only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentContext {
    pub one_photon_detuning_ghz: f64,
    pub two_photon_detuning_mhz: f64,
    pub pump_power_mw: f64,
    pub cell_temperature_c: f64,
    pub cell_length_mm: f64,
    pub crossing_angle_mrad: f64,
    pub pump_waist_um: f64,
    pub probe_waist_um: f64,
    pub pump_rabi_mhz: f64,
    pub sideband_offset_ghz: f64,
}

impl Default for ExperimentContext {
    fn default() -> Self {
        Self {
            one_photon_detuning_ghz: 1.6,
            two_photon_detuning_mhz: 0.0,
            pump_power_mw: 550.0,
            cell_temperature_c: 112.0,
            cell_length_mm: 25.0,
            crossing_angle_mrad: 6.0,
            pump_waist_um: 780.0,
            probe_waist_um: 370.0,
            pump_rabi_mhz: 535.0,
            sideband_offset_ghz: 9.2,
        }
    }
}

impl ExperimentContext {
    /// Names of fields that are not strictly positive. The two-photon
    /// detuning is signed and exempt.
    pub fn non_positive_fields(&self) -> Vec<&'static str> {
        [
            ("one_photon_detuning_ghz", self.one_photon_detuning_ghz),
            ("pump_power_mw", self.pump_power_mw),
            ("cell_temperature_c", self.cell_temperature_c),
            ("cell_length_mm", self.cell_length_mm),
            ("crossing_angle_mrad", self.crossing_angle_mrad),
            ("pump_waist_um", self.pump_waist_um),
            ("probe_waist_um", self.probe_waist_um),
            ("pump_rabi_mhz", self.pump_rabi_mhz),
            ("sideband_offset_ghz", self.sideband_offset_ghz),
        ]
        .into_iter()
        .filter(|(_, v)| !(*v > 0.0 && v.is_finite()))
        .map(|(k, _)| k)
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn seeded() -> GaussianState {
        seeded_pair(Complex64::new(200.0, 0.0), -1).unwrap().0
    }

    fn lumped(gain: f64, eta_p: f64, eta_c: f64, placement: LossPlacement) -> LumpedChannelSpec {
        LumpedChannelSpec {
            gain,
            eta_probe: eta_p,
            eta_conj: eta_c,
            placement,
        }
    }

    #[test]
    fn unit_transmission_matches_bare_squeezer() {
        let s = seeded();
        for placement in [LossPlacement::LossBeforeGain, LossPlacement::LossAfterGain] {
            let a = apply_lumped_channel(&s, 0, 1, lumped(2.5, 1.0, 1.0, placement)).unwrap();
            let b = s
                .two_mode_squeeze(0, 1, SqueezerSpec { gain: 2.5 })
                .unwrap();
            assert_abs_diff_eq!(a.cov(), b.cov(), epsilon = 1e-12);
            assert_abs_diff_eq!(a.means(), b.means(), epsilon = 1e-12);
        }
    }

    #[test]
    fn loss_before_gain_gains() {
        let spec = ChannelSpec::Lumped(lumped(1.235, 0.68, 1.0, LossPlacement::LossBeforeGain));
        let g = spec.gains().unwrap();
        assert_abs_diff_eq!(g.g_p, 0.68 * 1.235, epsilon = 1e-12);
        assert_abs_diff_eq!(g.g_c, 0.68 * 0.235, epsilon = 1e-12);
        assert!((g.g_p - 0.84).abs() < 1e-3 && (g.g_c - 0.16).abs() < 1e-3);
    }

    #[test]
    fn loss_before_gain_keeps_ideal_squeezing() {
        for gain in [1.2, 2.0, 6.0] {
            let spec = lumped(gain, 0.4, 1.0, LossPlacement::LossBeforeGain);
            let out = apply_lumped_channel(&seeded(), 0, 1, spec).unwrap();
            assert_abs_diff_eq!(
                out.intensity_difference_nsf(0, 1).unwrap(),
                1.0 / (2.0 * gain - 1.0),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn balanced_loss_after_gain() {
        let gain = 57.6 / 9.2;
        let out = apply_lumped_channel(
            &seeded(),
            0,
            1,
            lumped(gain, 0.74, 0.74, LossPlacement::LossAfterGain),
        )
        .unwrap();
        let nsf = out.intensity_difference_nsf(0, 1).unwrap();
        assert_abs_diff_eq!(nsf, 0.74 / (2.0 * gain - 1.0) + 0.26, epsilon = 1e-12);
        assert!((nsf - 0.324).abs() < 2e-3, "{nsf}");
    }

    #[test]
    fn ideal_gains_differ_by_one() {
        for gain in [1.0, 1.7, 6.26, 40.0] {
            let g = ChannelSpec::Ideal(SqueezerSpec { gain }).gains().unwrap();
            assert_abs_diff_eq!(g.g_p, gain, epsilon = 1e-12 * gain);
            assert_abs_diff_eq!(g.difference(), 1.0, epsilon = 1e-12 * gain);
        }
    }

    #[test]
    fn pure_absorber_cascade() {
        let spec = CascadeSpec {
            steps: 17,
            gamma_total: 0.0,
            alpha_probe_total: 0.8,
            alpha_conj_total: 0.0,
        };
        let g = ChannelSpec::Cascade(spec).gains().unwrap();
        assert_abs_diff_eq!(g.g_p, (-0.8f64).exp(), epsilon = 1e-14);
        assert_eq!(g.g_c, 0.0);
    }

    #[test]
    fn lossless_cascade_is_one_squeezer() {
        let spec = CascadeSpec {
            steps: 800,
            gamma_total: 0.7,
            alpha_probe_total: 0.0,
            alpha_conj_total: 0.0,
        };
        let a = apply_cascade(&seeded(), 0, 1, spec).unwrap();
        let b = seeded()
            .two_mode_squeeze(
                0,
                1,
                SqueezerSpec {
                    gain: spec.lossless_gain(),
                },
            )
            .unwrap();
        let scale = b.cov().amax();
        assert_abs_diff_eq!(a.cov(), b.cov(), epsilon = 1e-9 * scale);
    }

    #[test]
    fn cascade_step_count_matters_with_loss() {
        let spec = CascadeSpec {
            steps: 1,
            gamma_total: 0.6,
            alpha_probe_total: 0.5,
            alpha_conj_total: 0.1,
        };
        let one = apply_cascade(&seeded(), 0, 1, spec).unwrap();
        let two = apply_cascade(&seeded(), 0, 1, spec.with_steps(2)).unwrap();
        let d = (one.intensity_difference_nsf(0, 1).unwrap()
            - two.intensity_difference_nsf(0, 1).unwrap())
        .abs();
        assert!(d > 1e-6, "{d}");
    }

    #[test]
    fn invalid_specs() {
        assert!(ChannelSpec::Cascade(CascadeSpec {
            steps: 0,
            gamma_total: 0.1,
            alpha_probe_total: 0.0,
            alpha_conj_total: 0.0
        })
        .validate()
        .is_err());
        assert!(ChannelSpec::Cascade(CascadeSpec {
            steps: 3,
            gamma_total: -0.1,
            alpha_probe_total: 0.0,
            alpha_conj_total: 0.0
        })
        .validate()
        .is_err());
        assert!(
            ChannelSpec::Lumped(lumped(2.0, 1.5, 1.0, LossPlacement::LossAfterGain))
                .gains()
                .is_err()
        );
        assert!(
            ChannelSpec::Lumped(lumped(0.5, 1.0, 1.0, LossPlacement::LossAfterGain))
                .gains()
                .is_err()
        );
    }

    #[test]
    fn experiment_context_positivity() {
        let mut ctx = ExperimentContext::default();
        assert!(ctx.non_positive_fields().is_empty());
        ctx.pump_power_mw = 0.0;
        ctx.two_photon_detuning_mhz = -19.0;
        assert_eq!(ctx.non_positive_fields(), vec!["pump_power_mw"]);
    }
}
