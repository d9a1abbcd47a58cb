//! Empirical probe and conjugate gains as functions of two-photon detuning.
//!
//! The probe gain is a logistic roll-off from a plateau down to a floor; the
//! conjugate gain is a peak with different widths on either side of its
//! maximum. Default parameters were calibrated against measured anchor
//! points: probe plateau 0.85, probe 0.27 at −50 MHz, conjugate maximum 0.27
//! at −42 MHz, and a total gain within [0.95, 1] from −25 to −5 MHz.

use serde::{Deserialize, Serialize};

use super::GainPair;
use crate::error::{Error, Result};

/// Detuning range the default model was calibrated on, in MHz.
pub const MODEL_RANGE_MHZ: (f64, f64) = (-50.0, 16.0);

const WINDOW_MIN_SUM: f64 = 0.95;
const WINDOW_MAX_SUM: f64 = 1.0 + 1e-6;
/// Scan resolution of [`nonamplifying_window`], in MHz.
pub const WINDOW_SCAN_MHZ: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainCurveModel {
    pub probe_plateau: f64,
    pub probe_floor: f64,
    pub probe_center_mhz: f64,
    pub probe_width_mhz: f64,
    pub conj_amplitude: f64,
    pub conj_center_mhz: f64,
    /// Width of the conjugate peak on the negative-detuning side.
    pub conj_width_low_mhz: f64,
    /// Width of the conjugate peak on the positive-detuning side.
    pub conj_width_high_mhz: f64,
}

impl Default for GainCurveModel {
    fn default() -> Self {
        Self {
            probe_plateau: 0.85,
            probe_floor: 0.217,
            probe_center_mhz: -34.8,
            probe_width_mhz: 6.3,
            conj_amplitude: 0.27,
            conj_center_mhz: -42.0,
            conj_width_low_mhz: 23.7,
            conj_width_high_mhz: 28.3,
        }
    }
}

/// One evaluation of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub delta_mhz: f64,
    pub gains: GainPair,
    /// Set when `delta_mhz` lies outside the calibrated range.
    pub extrapolated: bool,
}

impl GainCurveModel {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("probe_plateau", self.probe_plateau),
            ("probe_floor", self.probe_floor),
            ("conj_amplitude", self.conj_amplitude),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be finite and >= 0"));
            }
        }
        for (name, v) in [
            ("probe_width_mhz", self.probe_width_mhz),
            ("conj_width_low_mhz", self.conj_width_low_mhz),
            ("conj_width_high_mhz", self.conj_width_high_mhz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be finite and > 0"));
            }
        }
        for (name, v) in [
            ("probe_center_mhz", self.probe_center_mhz),
            ("conj_center_mhz", self.conj_center_mhz),
        ] {
            if !v.is_finite() {
                bad.push(format!("{name} must be finite"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(bad.join("; ")))
        }
    }

    pub fn probe_gain(&self, delta_mhz: f64) -> f64 {
        let x = (delta_mhz - self.probe_center_mhz) / self.probe_width_mhz;
        self.probe_floor + (self.probe_plateau - self.probe_floor) / (1.0 + (-x).exp())
    }

    pub fn conj_gain(&self, delta_mhz: f64) -> f64 {
        let offset = delta_mhz - self.conj_center_mhz;
        let width = if offset < 0.0 {
            self.conj_width_low_mhz
        } else {
            self.conj_width_high_mhz
        };
        self.conj_amplitude * (-offset * offset / (2.0 * width * width)).exp()
    }

    pub fn evaluate(&self, delta_mhz: f64) -> CurveSample {
        CurveSample {
            delta_mhz,
            gains: GainPair {
                g_p: self.probe_gain(delta_mhz),
                g_c: self.conj_gain(delta_mhz),
            },
            extrapolated: !(MODEL_RANGE_MHZ.0..=MODEL_RANGE_MHZ.1).contains(&delta_mhz),
        }
    }

    /// Copy with every gain level multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            probe_plateau: self.probe_plateau * factor,
            probe_floor: self.probe_floor * factor,
            conj_amplitude: self.conj_amplitude * factor,
            ..*self
        }
    }
}

pub fn gain_curves(model: &GainCurveModel, delta_mhz: f64) -> CurveSample {
    model.evaluate(delta_mhz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetuningWindow {
    pub lo_mhz: f64,
    pub hi_mhz: f64,
}

impl DetuningWindow {
    pub fn contains(&self, other: (f64, f64)) -> bool {
        self.lo_mhz <= other.0 + 1e-9 && self.hi_mhz >= other.1 - 1e-9
    }
}

/// Longest contiguous detuning interval on which `0.95 ≤ g_p + g_c ≤ 1`,
/// scanned over the calibrated range at 0.1 MHz. `None` when no scan point
/// qualifies.
pub fn nonamplifying_window(model: &GainCurveModel) -> Option<DetuningWindow> {
    let (lo, hi) = MODEL_RANGE_MHZ;
    let n = ((hi - lo) / WINDOW_SCAN_MHZ).round() as usize;
    let delta = |i: usize| lo + i as f64 * WINDOW_SCAN_MHZ;
    let inside = |i: usize| {
        let s = model.evaluate(delta(i)).gains.sum();
        (WINDOW_MIN_SUM..=WINDOW_MAX_SUM).contains(&s)
    };

    let mut best: Option<(usize, usize)> = None;
    let mut run_start: Option<usize> = None;
    for i in 0..=n + 1 {
        let ok = i <= n && inside(i);
        match (ok, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                let e = i - 1;
                if best.is_none_or(|(bs, be)| e - s > be - bs) {
                    best = Some((s, e));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    best.map(|(s, e)| DetuningWindow {
        lo_mhz: delta(s),
        hi_mhz: delta(e),
    })
}
