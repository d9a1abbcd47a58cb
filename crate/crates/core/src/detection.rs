//! Balanced detection, shot-noise normalization and probe attenuation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::optim::golden_section;

/// Photodetector chain. Only the quantum efficiency and the optional
/// electronic-noise floor enter the noise factors; the remaining fields are
/// carried as measurement metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionChain {
    pub quantum_efficiency: f64,
    pub transimpedance_v_per_a: f64,
    pub analysis_frequency_mhz: f64,
    pub rbw_khz: f64,
    pub vbw_hz: f64,
    /// Electronic noise power in units of the measured shot-noise level,
    /// added to every noise factor.
    pub electronic_noise: f64,
}

impl Default for DetectionChain {
    fn default() -> Self {
        Self {
            quantum_efficiency: 0.98,
            transimpedance_v_per_a: 1e5,
            analysis_frequency_mhz: 1.2,
            rbw_khz: 30.0,
            vbw_hz: 100.0,
            electronic_noise: 0.0,
        }
    }
}

impl DetectionChain {
    pub fn ideal() -> Self {
        Self {
            quantum_efficiency: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.quantum_efficiency) {
            return Err(Error::Validation(format!(
                "quantum_efficiency must lie in [0, 1], got {}",
                self.quantum_efficiency
            )));
        }
        if !(self.electronic_noise >= 0.0 && self.electronic_noise.is_finite()) {
            return Err(Error::Validation(format!(
                "electronic_noise must be finite and >= 0, got {}",
                self.electronic_noise
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Probe,
    Conjugate,
    Difference,
}

impl Observable {
    pub const ALL: [Observable; 3] = [
        Observable::Probe,
        Observable::Conjugate,
        Observable::Difference,
    ];
}

/// Noise power relative to the shot-noise level of the same detected power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeasurement {
    pub nsf_linear: f64,
    pub nsf_db: f64,
    pub which: Observable,
}

impl NoiseMeasurement {
    pub fn new(nsf_linear: f64, which: Observable) -> Result<Self> {
        Ok(Self {
            nsf_linear,
            nsf_db: to_decibel(nsf_linear)?,
            which,
        })
    }
}

pub fn to_decibel(linear: f64) -> Result<f64> {
    if linear <= 0.0 || !linear.is_finite() {
        return Err(Error::Domain(format!(
            "decibel conversion needs a positive finite ratio, got {linear}"
        )));
    }
    Ok(10.0 * linear.log10())
}

pub fn from_decibel(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Detects both beams with `chain` and reports the requested noise factor.
pub fn measure_noise(
    state: &GaussianState,
    probe: usize,
    conj: usize,
    chain: &DetectionChain,
    which: Observable,
) -> Result<NoiseMeasurement> {
    chain.validate()?;
    let eta = chain.quantum_efficiency;
    let detected = state
        .beamsplit_loss(probe, eta)?
        .beamsplit_loss(conj, eta)?;
    let nsf = match which {
        Observable::Probe => detected.single_beam_nsf(probe)?,
        Observable::Conjugate => detected.single_beam_nsf(conj)?,
        Observable::Difference => detected.intensity_difference_nsf(probe, conj)?,
    };
    NoiseMeasurement::new(nsf + chain.electronic_noise, which)
}

pub const COARSE_SCAN_STEP: f64 = 0.05;
pub const DENSE_SCAN_STEP: f64 = 0.005;
pub const ATTENUATION_TOL: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttenuationOptimum {
    /// Probe transmission at the optimum.
    pub t_star: f64,
    pub nsf_star: f64,
    pub nsf_star_db: f64,
    /// Noise factor with the probe unattenuated (`t = 1`).
    pub nsf_unattenuated: f64,
    /// Set when the coarse scan found more than one local minimum and the
    /// dense scan was used instead of a single golden-section bracket.
    pub dense_fallback: bool,
}

fn scan(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    (0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect()
}

fn is_unimodal(values: &[f64]) -> bool {
    let mut rising = false;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        if d > 1e-15 {
            rising = true;
        } else if d < -1e-15 && rising {
            return false;
        }
    }
    true
}

/// Minimizes the detected difference-noise factor over a probe
/// transmission `t` in `t_range`, assuming a single interior minimum and
/// checking that assumption on a coarse scan first.
pub fn optimize_probe_attenuation(
    state: &GaussianState,
    probe: usize,
    conj: usize,
    chain: &DetectionChain,
    t_range: (f64, f64),
) -> Result<AttenuationOptimum> {
    let (lo, hi) = t_range;
    if !(0.0 < lo && lo < hi && hi <= 1.0) {
        return Err(Error::Validation(format!(
            "attenuation range must satisfy 0 < lo < hi <= 1, got [{lo}, {hi}]"
        )));
    }
    let nsf_at = |t: f64| -> Result<f64> {
        let attenuated = state.beamsplit_loss(probe, t)?;
        Ok(measure_noise(&attenuated, probe, conj, chain, Observable::Difference)?.nsf_linear)
    };
    let nsf_unattenuated = nsf_at(1.0)?;
    // Surface precondition failures (dark beams) before scanning.
    nsf_at(lo)?;
    let f = |t: f64| nsf_at(t).unwrap_or(f64::INFINITY);

    let coarse = scan(lo, hi, COARSE_SCAN_STEP);
    let coarse_vals: Vec<f64> = coarse.iter().map(|&t| f(t)).collect();
    let dense_fallback = !is_unimodal(&coarse_vals);
    let (grid, vals, step) = if dense_fallback {
        let g = scan(lo, hi, DENSE_SCAN_STEP);
        let v = g.iter().map(|&t| f(t)).collect();
        (g, v, DENSE_SCAN_STEP)
    } else {
        (coarse, coarse_vals, COARSE_SCAN_STEP)
    };
    let k = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let a = (grid[k] - step).max(lo);
    let b = (grid[k] + step).min(hi);
    let (mut t_star, mut nsf_star) = golden_section(f, a, b, ATTENUATION_TOL);
    if vals[k] < nsf_star {
        (t_star, nsf_star) = (grid[k], vals[k]);
    }
    // Attenuation that does not help is not applied.
    let at_hi = f(hi);
    if at_hi <= nsf_star + 1e-12 {
        (t_star, nsf_star) = (hi, at_hi);
    }
    Ok(AttenuationOptimum {
        t_star,
        nsf_star,
        nsf_star_db: to_decibel(nsf_star)?,
        nsf_unattenuated,
        dense_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::seeded_pair;
    use crate::gaussian::SqueezerSpec;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;

    fn squeezed(gain: f64) -> GaussianState {
        let (s, p, c) = seeded_pair(Complex64::new(300.0, 0.0), -1).unwrap();
        s.two_mode_squeeze(p, c, SqueezerSpec { gain }).unwrap()
    }

    fn coherent_pair() -> GaussianState {
        seeded_pair(Complex64::new(50.0, 0.0), 0)
            .unwrap()
            .0
            .displace(1, Complex64::new(0.0, 30.0))
            .unwrap()
    }

    #[test]
    fn decibel_conversions() {
        assert_eq!(to_decibel(1.0).unwrap(), 0.0);
        assert!((to_decibel(0.3236).unwrap() + 4.9).abs() < 1e-3);
        assert!((to_decibel(10f64.powf(0.81)).unwrap() - 8.1).abs() < 1e-12);
        assert!((10f64.powf(0.81) - 6.46).abs() < 5e-3);
        assert!(matches!(to_decibel(0.0), Err(Error::Domain(_))));
        assert!(matches!(to_decibel(-2.0), Err(Error::Domain(_))));
        for x in [1e-6, 0.3, 1.0, 7.5, 1e9] {
            assert!((from_decibel(to_decibel(x).unwrap()) / x - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ideal_high_gain_levels() {
        let gain = 57.6 / 9.2;
        let s = squeezed(gain);
        let chain = DetectionChain::ideal();
        let d = measure_noise(&s, 0, 1, &chain, Observable::Difference).unwrap();
        assert!((d.nsf_db + 10.6).abs() < 0.05, "{d:?}");
        let p = measure_noise(&s, 0, 1, &chain, Observable::Probe).unwrap();
        assert_abs_diff_eq!(p.nsf_db, 10.0 * (2.0 * gain - 1.0).log10(), epsilon = 1e-9);
        assert!((p.nsf_db - 10.6).abs() < 0.05);
    }

    #[test]
    fn coherent_beams_at_snl() {
        let s = coherent_pair();
        for which in Observable::ALL {
            let m = measure_noise(&s, 0, 1, &DetectionChain::default(), which).unwrap();
            assert_abs_diff_eq!(m.nsf_db, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn efficiency_law() {
        let s = squeezed(3.0);
        let chain = DetectionChain {
            quantum_efficiency: 0.8,
            ..Default::default()
        };
        let m = measure_noise(&s, 0, 1, &chain, Observable::Difference).unwrap();
        assert_abs_diff_eq!(m.nsf_linear, 0.8 / 5.0 + 0.2, epsilon = 1e-12);
        let bad = DetectionChain {
            quantum_efficiency: 1.2,
            ..Default::default()
        };
        assert!(measure_noise(&s, 0, 1, &bad, Observable::Difference).is_err());
    }

    #[test]
    fn electronic_floor_adds() {
        let s = coherent_pair();
        let chain = DetectionChain {
            electronic_noise: 0.05,
            ..Default::default()
        };
        let m = measure_noise(&s, 0, 1, &chain, Observable::Probe).unwrap();
        assert_abs_diff_eq!(m.nsf_linear, 1.05, epsilon = 1e-12);
    }

    #[test]
    fn optimum_for_gain_two() {
        let opt =
            optimize_probe_attenuation(&squeezed(2.0), 0, 1, &DetectionChain::ideal(), (0.01, 1.0))
                .unwrap();
        let t_exact = (7f64.sqrt() - 1.0) / 2.0;
        assert!((opt.t_star - t_exact).abs() < 1e-4, "{opt:?}");
        assert!((opt.nsf_star - 0.2916).abs() < 1e-4);
        assert!(opt.nsf_star < opt.nsf_unattenuated);
        assert!(!opt.dense_fallback);
    }

    #[test]
    fn classical_beams_never_attenuated() {
        let opt = optimize_probe_attenuation(
            &coherent_pair(),
            0,
            1,
            &DetectionChain::default(),
            (0.01, 1.0),
        )
        .unwrap();
        assert_eq!(opt.t_star, 1.0);
        assert_abs_diff_eq!(opt.nsf_star_db, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn range_validation() {
        let s = squeezed(2.0);
        let chain = DetectionChain::ideal();
        assert!(optimize_probe_attenuation(&s, 0, 1, &chain, (0.0, 1.0)).is_err());
        assert!(optimize_probe_attenuation(&s, 0, 1, &chain, (0.5, 0.4)).is_err());
        assert!(optimize_probe_attenuation(&s, 0, 1, &chain, (0.1, 1.1)).is_err());
    }

    #[test]
    fn unimodality_detector() {
        assert!(is_unimodal(&[3.0, 2.0, 1.0, 1.0, 2.0]));
        assert!(is_unimodal(&[1.0, 2.0, 3.0]));
        assert!(!is_unimodal(&[3.0, 1.0, 2.0, 0.5, 1.0]));
    }
}
