//! Sampling oracle for the intensity-difference noise factor.
//!
//! Each sample draws unit-variance quadrature fluctuations for the two input
//! modes, pushes them through the channel one step at a time (fresh vacuum
//! noise enters at every loss), and records the linearized photon-number
//! difference. Nothing here touches the covariance-matrix code path.
//!
//! Work is split into fixed-size chunks; chunk `i` draws from the ChaCha
//! stream `i` of the master seed, so results do not depend on thread count.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 10_000;
const CHUNK: usize = 10_000;

/// Which of the two beams a step acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Beam {
    Probe,
    Conjugate,
}

impl Beam {
    fn offset(self) -> usize {
        match self {
            Beam::Probe => 0,
            Beam::Conjugate => 2,
        }
    }
}

/// One elementary linear operation on the probe/conjugate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinearStep {
    Squeeze { gain: f64 },
    Loss { beam: Beam, eta: f64 },
}

/// Two-beam scenario: coherent inputs followed by a list of linear steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct McScenario {
    pub seed_probe: Complex64,
    pub seed_conj: Complex64,
    pub steps: Vec<LinearStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub nsf: f64,
    pub std_error: f64,
    pub samples: usize,
}

// Quadrature order (X_p, P_p, X_c, P_c).
fn squeeze(q: &mut [f64; 4], gain: f64) {
    let g = gain.sqrt();
    let h = (gain - 1.0).sqrt();
    let [xp, pp, xc, pc] = *q;
    q[0] = g * xp + h * xc;
    q[1] = g * pp - h * pc;
    q[2] = g * xc + h * xp;
    q[3] = g * pc - h * pp;
}

fn attenuate(q: &mut [f64; 4], beam: Beam, eta: f64, noise: Option<(f64, f64)>) {
    let k = beam.offset();
    let t = eta.sqrt();
    let (nx, np) = noise.unwrap_or((0.0, 0.0));
    let r = (1.0 - eta).sqrt();
    q[k] = t * q[k] + r * nx;
    q[k + 1] = t * q[k + 1] + r * np;
}

fn validate(scenario: &McScenario) -> Result<()> {
    for step in &scenario.steps {
        match *step {
            LinearStep::Squeeze { gain } if !(gain >= 1.0 && gain.is_finite()) => {
                return Err(Error::Domain(format!(
                    "squeezer gain must be >= 1, got {gain}"
                )));
            }
            LinearStep::Loss { eta, .. } if !(0.0..=1.0).contains(&eta) => {
                return Err(Error::Domain(format!(
                    "transmissivity must lie in [0, 1], got {eta}"
                )));
            }
            _ => {}
        }
    }
    Ok(())
}

/// Output mean quadratures of the scenario.
fn propagate_means(scenario: &McScenario) -> [f64; 4] {
    let (a, b) = (scenario.seed_probe, scenario.seed_conj);
    let mut m = [2.0 * a.re, 2.0 * a.im, 2.0 * b.re, 2.0 * b.im];
    for step in &scenario.steps {
        match *step {
            LinearStep::Squeeze { gain } => squeeze(&mut m, gain),
            LinearStep::Loss { beam, eta } => attenuate(&mut m, beam, eta, None),
        }
    }
    m
}

/// Sample estimate of `Var(N_p − N_c) / SNL`.
pub fn mc_nsf_oracle(scenario: &McScenario, samples: usize, rng_seed: u64) -> Result<McEstimate> {
    if samples < MIN_SAMPLES {
        return Err(Error::Validation(format!(
            "at least {MIN_SAMPLES} samples required, got {samples}"
        )));
    }
    validate(scenario)?;
    let m = propagate_means(scenario);
    let snl = m.iter().map(|v| v * v).sum::<f64>();
    if snl == 0.0 {
        return Err(Error::Precondition("both output beams are dark".into()));
    }

    let chunks = samples.div_ceil(CHUNK);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(i as u64);
            let n = CHUNK.min(samples - i * CHUNK);
            let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let mut q = [draw(), draw(), draw(), draw()];
                for step in &scenario.steps {
                    match *step {
                        LinearStep::Squeeze { gain } => squeeze(&mut q, gain),
                        LinearStep::Loss { beam, eta } => {
                            let noise = (draw(), draw());
                            attenuate(&mut q, beam, eta, Some(noise));
                        }
                    }
                }
                let d = m[0] * q[0] + m[1] * q[1] - m[2] * q[2] - m[3] * q[3];
                s1 += d;
                s2 += d * d;
            }
            (s1, s2)
        })
        .collect();

    let (s1, s2) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let n = samples as f64;
    let var = (s2 - s1 * s1 / n) / (n - 1.0);
    let nsf = var / snl;
    Ok(McEstimate {
        nsf,
        std_error: nsf * (2.0 / (n - 1.0)).sqrt(),
        samples,
    })
}
