//! Inversion of the channel families: find parameters that reproduce
//! measured gains (and optionally a measured difference-noise factor).
//!
//! Parameters are searched in squared coordinates (`G = 1 + u²`,
//! `η = exp(−v²)`, `α = v²`, ...) so the simplex never leaves the physical
//! domain. Starting points come from closed-form lumped inversions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{seeded_pair, CascadeSpec, ChannelSpec, GainPair, LossPlacement, LumpedChannelSpec};
use crate::error::{Error, Result};
use crate::gaussian::SqueezerSpec;
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Squared-relative residual below which a fit counts as reproducing its
/// targets.
pub const FIT_RESIDUAL_TOL: f64 = 1e-6;

/// Seed amplitude used when a fit needs the difference-noise factor. Any
/// bright value gives the same factor.
const FIT_SEED: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFamily {
    Ideal,
    LossBeforeGain,
    /// Without a noise target the conjugate transmission is pinned to 1.
    LossAfterGain,
    /// Without a noise target the conjugate absorption is pinned to 0.
    Cascade {
        steps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: ChannelSpec,
    pub gains: GainPair,
    /// Model difference-noise factor, reported when a noise target was given.
    pub nsf: Option<f64>,
    pub residual: f64,
    /// False when the residual stayed above [`FIT_RESIDUAL_TOL`]; the
    /// target is then outside what the family can reach.
    pub reachable: bool,
}

fn rel(value: f64, target: f64) -> f64 {
    if target.abs() > 1e-12 {
        (value - target) / target
    } else {
        value - target
    }
}

fn model_nsf(spec: &ChannelSpec) -> Result<f64> {
    let (state, p, c) = seeded_pair(Complex64::new(FIT_SEED, 0.0), 0)?;
    spec.apply(&state, p, c)?.intensity_difference_nsf(p, c)
}

fn residual(spec: &ChannelSpec, target: GainPair, target_nsf: Option<f64>) -> f64 {
    let Ok(g) = spec.gains() else {
        return f64::INFINITY;
    };
    let mut r = rel(g.g_p, target.g_p).powi(2) + rel(g.g_c, target.g_c).powi(2);
    if let Some(t) = target_nsf {
        match model_nsf(spec) {
            Ok(n) => r += rel(n, t).powi(2),
            Err(_) => return f64::INFINITY,
        }
    }
    r
}

fn sq_inv_gain(gain: f64) -> f64 {
    (gain - 1.0).max(0.0).sqrt()
}

fn sq_inv_eta(eta: f64) -> f64 {
    (-eta.clamp(1e-300, 1.0).ln()).max(0.0).sqrt()
}

/// Closed-form loss-before-gain inversion: `g_p = ηG`, `g_c = η(G − 1)`.
fn lumped_inversion(target: GainPair) -> Option<(f64, f64)> {
    let d = target.difference();
    if d > 0.0 && d <= 1.0 && target.g_c >= 0.0 {
        Some((target.g_p / d, d))
    } else {
        None
    }
}

type Builder = Box<dyn Fn(&[f64]) -> ChannelSpec>;

struct Family {
    build: Builder,
    starts: Vec<Vec<f64>>,
}

fn family_model(family: FitFamily, target: GainPair, with_nsf: bool) -> Result<Family> {
    let fallback = || {
        let gain = 1.0 + target.g_c;
        (gain, (target.g_p / gain).min(1.0))
    };
    Ok(match family {
        FitFamily::Ideal => Family {
            build: Box::new(|x| {
                ChannelSpec::Ideal(SqueezerSpec {
                    gain: 1.0 + x[0] * x[0],
                })
            }),
            starts: vec![vec![sq_inv_gain(target.g_p.max(1.0))]],
        },
        FitFamily::LossBeforeGain => {
            let (gain, eta) = lumped_inversion(target).unwrap_or_else(fallback);
            Family {
                build: Box::new(|x| {
                    ChannelSpec::Lumped(LumpedChannelSpec {
                        gain: 1.0 + x[0] * x[0],
                        eta_probe: (-x[1] * x[1]).exp(),
                        eta_conj: 1.0,
                        placement: LossPlacement::LossBeforeGain,
                    })
                }),
                starts: vec![vec![sq_inv_gain(gain), sq_inv_eta(eta)]],
            }
        }
        FitFamily::LossAfterGain => {
            let (gain, eta_p) = fallback();
            let mut start = vec![sq_inv_gain(gain), sq_inv_eta(eta_p)];
            if with_nsf {
                start.push(0.0);
            }
            Family {
                build: Box::new(|x| {
                    ChannelSpec::Lumped(LumpedChannelSpec {
                        gain: 1.0 + x[0] * x[0],
                        eta_probe: (-x[1] * x[1]).exp(),
                        eta_conj: x.get(2).map_or(1.0, |w| (-w * w).exp()),
                        placement: LossPlacement::LossAfterGain,
                    })
                }),
                starts: vec![start],
            }
        }
        FitFamily::Cascade { steps } => {
            if steps == 0 {
                return Err(Error::Domain("cascade needs at least one step".into()));
            }
            let (gain, eta) = lumped_inversion(target).unwrap_or_else(fallback);
            let u = SqueezerSpec { gain }.squeezing_parameter().sqrt();
            let v = sq_inv_eta(eta);
            let starts = [1.0f64, 0.5, 2.0]
                .iter()
                .map(|k| {
                    let mut s = vec![u, v * k.sqrt()];
                    if with_nsf {
                        s.push(0.0);
                    }
                    s
                })
                .collect();
            Family {
                build: Box::new(move |x| {
                    ChannelSpec::Cascade(CascadeSpec {
                        steps,
                        gamma_total: x[0] * x[0],
                        alpha_probe_total: x[1] * x[1],
                        alpha_conj_total: x.get(2).map_or(0.0, |w| w * w),
                    })
                }),
                starts,
            }
        }
    })
}

fn alpha_total(spec: &ChannelSpec) -> f64 {
    match spec {
        ChannelSpec::Cascade(c) => c.alpha_probe_total + c.alpha_conj_total,
        ChannelSpec::Lumped(l) => -(l.eta_probe.ln() + l.eta_conj.ln()),
        ChannelSpec::Ideal(_) => 0.0,
    }
}

/// Fits `family` to measured gains, and to a linear difference-noise factor
/// when `target_nsf` is given.
///
/// Unreachable targets are not an error: the best fit is returned with
/// `reachable = false`.
pub fn fit_channel(
    target: GainPair,
    target_nsf: Option<f64>,
    family: FitFamily,
) -> Result<FitResult> {
    let target = GainPair::new(target.g_p, target.g_c)?;
    if let Some(n) = target_nsf {
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Validation(format!(
                "target noise factor must be > 0, got {n}"
            )));
        }
    }
    let model = family_model(family, target, target_nsf.is_some())?;
    let opts = NelderMeadOptions::default();

    let mut best: Option<(ChannelSpec, f64)> = None;
    for start in &model.starts {
        let res = nelder_mead(
            |x| residual(&(model.build)(x), target, target_nsf),
            start,
            &opts,
        );
        let spec = (model.build)(&res.x);
        let better = match &best {
            None => true,
            Some((b, bf)) => {
                res.f < bf - 1e-12 || (res.f <= bf + 1e-12 && alpha_total(&spec) < alpha_total(b))
            }
        };
        if better {
            best = Some((spec, res.f));
        }
    }
    let (spec, residual) = best.expect("at least one start");
    let nsf = match target_nsf {
        Some(_) => Some(model_nsf(&spec)?),
        None => None,
    };
    Ok(FitResult {
        gains: spec.gains()?,
        spec,
        nsf,
        residual,
        reachable: residual < FIT_RESIDUAL_TOL,
    })
}

/// Balanced transmission `η` that brings an ideal squeezer of `gain` to the
/// difference-noise factor `target_nsf`: solves `η/(2G−1) + 1 − η = nsf`.
pub fn fit_balanced_efficiency(gain: f64, target_nsf: f64) -> Result<f64> {
    SqueezerSpec { gain }.validate()?;
    if gain == 1.0 {
        return Err(Error::Domain("a unit-gain squeezer cannot squeeze".into()));
    }
    let ideal = 1.0 / (2.0 * gain - 1.0);
    let eta = (1.0 - target_nsf) / (1.0 - ideal);
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!(
            "noise factor {target_nsf} unreachable with gain {gain} (needs eta = {eta})"
        )));
    }
    Ok(eta)
}
