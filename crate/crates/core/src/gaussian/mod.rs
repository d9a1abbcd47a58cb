//! Covariance-matrix representation of multimode Gaussian states.
//!
//! Quadratures are `X = a + a†` and `P = -i(a - a†)`, so the vacuum has unit
//! variance in every quadrature and a coherent amplitude `α` shows up as the
//! mean vector `(2 Re α, 2 Im α)`. Mode `k` in the label list owns rows and
//! columns `2k` and `2k + 1`.
//!
//! Squeezer phase convention: the conjugate output is phase conjugated with
//! respect to the probe, and the cross-covariance of the two amplitude
//! quadratures (each aligned to its own mean phase) is positive.

pub mod mc;

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the covariance symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue allowed for `cov + iΩ`.
pub const UNCERTAINTY_TOL: f64 = 1e-9;
/// Minimum mean photon flux for the bright-beam photodetection linearization.
pub const BRIGHT_FLUX_MIN: f64 = 10.0;
/// Flux below which a beam counts as exact vacuum in difference detection.
pub const VACUUM_FLUX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeRole {
    Probe,
    Conjugate,
    Auxiliary,
}

/// Identity of one optical mode. The topological charge rides along as
/// metadata and never enters the Gaussian dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeLabel {
    pub index: usize,
    pub role: ModeRole,
    pub topological_charge: i32,
}

impl ModeLabel {
    pub fn new(index: usize, role: ModeRole, topological_charge: i32) -> Self {
        Self {
            index,
            role,
            topological_charge,
        }
    }

    pub fn probe(index: usize) -> Self {
        Self::new(index, ModeRole::Probe, 0)
    }

    pub fn conjugate(index: usize) -> Self {
        Self::new(index, ModeRole::Conjugate, 0)
    }
}

/// Intensity gain of an ideal two-mode squeezer (probe gain `G`, conjugate
/// gain `G - 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezerSpec {
    pub gain: f64,
}

impl SqueezerSpec {
    pub fn new(gain: f64) -> Result<Self> {
        let spec = Self { gain };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gain.is_finite() || self.gain < 1.0 {
            return Err(Error::Domain(format!(
                "squeezer gain must be >= 1, got {}",
                self.gain
            )));
        }
        Ok(())
    }

    /// Squeezing parameter `r` with `G = cosh² r`.
    pub fn squeezing_parameter(&self) -> f64 {
        self.gain.sqrt().acosh()
    }

    pub fn from_squeezing_parameter(r: f64) -> Self {
        Self {
            gain: r.cosh().powi(2),
        }
    }
}

/// Mean quadrature vector and covariance matrix over labelled modes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    means: DVector<f64>,
    cov: DMatrix<f64>,
    modes: Vec<ModeLabel>,
}

impl GaussianState {
    pub fn vacuum(labels: &[ModeLabel]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Validation("a state needs at least one mode".into()));
        }
        for (k, label) in labels.iter().enumerate() {
            if labels[..k].iter().any(|other| other.index == label.index) {
                return Err(Error::Validation(format!(
                    "duplicate mode index {}",
                    label.index
                )));
            }
        }
        let dim = 2 * labels.len();
        Ok(Self {
            means: DVector::zeros(dim),
            cov: DMatrix::identity(dim, dim),
            modes: labels.to_vec(),
        })
    }

    /// Builds a state from raw moments, checking symmetry and the
    /// uncertainty principle.
    pub fn from_moments(
        labels: &[ModeLabel],
        means: DVector<f64>,
        cov: DMatrix<f64>,
    ) -> Result<Self> {
        let mut state = Self::vacuum(labels)?;
        let dim = state.dim();
        if means.len() != dim || cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::Validation(format!(
                "moment dimensions do not match {} modes",
                labels.len()
            )));
        }
        state.means = means;
        state.cov = cov;
        state.check_physical()?;
        Ok(state)
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    fn dim(&self) -> usize {
        2 * self.modes.len()
    }

    pub fn modes(&self) -> &[ModeLabel] {
        &self.modes
    }

    pub fn means(&self) -> &DVector<f64> {
        &self.means
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn label(&self, mode: usize) -> Result<&ModeLabel> {
        self.modes
            .iter()
            .find(|m| m.index == mode)
            .ok_or(Error::UnknownMode(mode))
    }

    fn slot(&self, mode: usize) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.index == mode)
            .ok_or(Error::UnknownMode(mode))
    }

    /// Shifts the mean of `mode` by the coherent amplitude `alpha`.
    pub fn displace(&self, mode: usize, alpha: Complex64) -> Result<Self> {
        let k = self.slot(mode)?;
        let mut out = self.clone();
        out.means[2 * k] += 2.0 * alpha.re;
        out.means[2 * k + 1] += 2.0 * alpha.im;
        Ok(out)
    }

    /// Applies `a_p → √G a_p + √(G−1) a_c†`, `a_c → √G a_c + √(G−1) a_p†`.
    pub fn two_mode_squeeze(&self, probe: usize, conj: usize, spec: SqueezerSpec) -> Result<Self> {
        spec.validate()?;
        if probe == conj {
            return Err(Error::Validation(
                "probe and conjugate must be distinct modes".into(),
            ));
        }
        let p = self.slot(probe)?;
        let c = self.slot(conj)?;
        let s = two_mode_squeezer_matrix(spec.gain);
        let idx = [2 * p, 2 * p + 1, 2 * c, 2 * c + 1];
        Ok(self.apply_local(&idx, &s))
    }

    /// Applies the 4×4 symplectic `s` on the quadrature rows `idx`.
    fn apply_local(&self, idx: &[usize; 4], s: &Matrix4<f64>) -> Self {
        let dim = self.dim();
        let mut full = DMatrix::identity(dim, dim);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                full[(i, j)] = s[(a, b)];
            }
        }
        let mut out = self.clone();
        out.means = &full * &self.means;
        out.cov = &full * &self.cov * full.transpose();
        out.symmetrize();
        out
    }

    /// Mixes `mode` with vacuum on a beam splitter of transmissivity `eta`
    /// and discards the reflected port.
    pub fn beamsplit_loss(&self, mode: usize, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!(
                "transmissivity must lie in [0, 1], got {eta}"
            )));
        }
        let k = self.slot(mode)?;
        let t = eta.sqrt();
        let rows = [2 * k, 2 * k + 1];
        let mut out = self.clone();
        for &r in &rows {
            out.means[r] *= t;
        }
        let dim = self.dim();
        for &r in &rows {
            for j in 0..dim {
                out.cov[(r, j)] *= t;
                out.cov[(j, r)] *= t;
            }
        }
        for &r in &rows {
            out.cov[(r, r)] += 1.0 - eta;
        }
        Ok(out)
    }

    /// 2×2 covariance block between two modes.
    pub fn second_moments(&self, mode_i: usize, mode_j: usize) -> Result<nalgebra::Matrix2<f64>> {
        let i = self.slot(mode_i)?;
        let j = self.slot(mode_j)?;
        Ok(self.cov.fixed_view::<2, 2>(2 * i, 2 * j).into_owned())
    }

    /// Mean quadrature pair `(⟨X⟩, ⟨P⟩)` of a mode.
    pub fn mean_quadratures(&self, mode: usize) -> Result<nalgebra::Vector2<f64>> {
        let k = self.slot(mode)?;
        Ok(nalgebra::Vector2::new(
            self.means[2 * k],
            self.means[2 * k + 1],
        ))
    }

    /// Mean complex amplitude `⟨a⟩`.
    pub fn amplitude(&self, mode: usize) -> Result<Complex64> {
        let m = self.mean_quadratures(mode)?;
        Ok(Complex64::new(m[0] / 2.0, m[1] / 2.0))
    }

    /// `⟨a†a⟩`, including the incoherent (thermal) part.
    pub fn mean_photon_flux(&self, mode: usize) -> Result<f64> {
        let m = self.mean_quadratures(mode)?;
        let block = self.second_moments(mode, mode)?;
        Ok(m.norm_squared() / 4.0 + (block.trace() - 2.0) / 4.0)
    }

    /// `|⟨a⟩|²`, the part of the flux carried by the mean field.
    pub fn coherent_flux(&self, mode: usize) -> Result<f64> {
        Ok(self.mean_quadratures(mode)?.norm_squared() / 4.0)
    }

    /// Variance of the quadrature aligned with the mode's mean field.
    pub fn amplitude_quadrature_variance(&self, mode: usize) -> Result<f64> {
        let m = self.mean_quadratures(mode)?;
        let norm = m.norm();
        if norm == 0.0 {
            return Err(Error::Precondition(format!(
                "mode {mode} has no mean field to define an amplitude quadrature"
            )));
        }
        let u = m / norm;
        Ok((u.transpose() * self.second_moments(mode, mode)? * u)[(0, 0)])
    }

    fn require_bright(&self, mode: usize) -> Result<()> {
        let flux = self.mean_photon_flux(mode)?;
        if flux < BRIGHT_FLUX_MIN {
            return Err(Error::Precondition(format!(
                "mode {mode} mean flux {flux:.3e} below {BRIGHT_FLUX_MIN}; bright-beam linearization invalid"
            )));
        }
        Ok(())
    }

    /// Photocurrent noise of one beam relative to its shot-noise level,
    /// `Var(N)/|⟨a⟩|²` in the bright-beam linearization.
    pub fn single_beam_nsf(&self, mode: usize) -> Result<f64> {
        self.require_bright(mode)?;
        self.amplitude_quadrature_variance(mode)
    }

    /// Intensity-difference noise relative to the shot-noise level of the
    /// summed detected power. With `δN_k = |⟨a_k⟩| δX_k` and `m_k` the mean
    /// quadrature vector, `Var(N_p − N_c) = (m_pᵀV_pp m_p + m_cᵀV_cc m_c −
    /// 2 m_pᵀV_pc m_c)/4` and the SNL is `(|m_p|² + |m_c|²)/4`.
    pub fn intensity_difference_nsf(&self, probe: usize, conj: usize) -> Result<f64> {
        if probe == conj {
            return Err(Error::Validation(
                "probe and conjugate must be distinct modes".into(),
            ));
        }
        // A beam in exact vacuum has no photons and no photon-number noise,
        // so the linearization is exact for it without being bright.
        let dark_probe = self.mean_photon_flux(probe)? <= VACUUM_FLUX_TOL;
        let dark_conj = self.mean_photon_flux(conj)? <= VACUUM_FLUX_TOL;
        if !dark_probe || dark_conj {
            self.require_bright(probe)?;
        }
        if !dark_conj {
            self.require_bright(conj)?;
        }
        let mp = self.mean_quadratures(probe)?;
        let mc = self.mean_quadratures(conj)?;
        let vpp = self.second_moments(probe, probe)?;
        let vcc = self.second_moments(conj, conj)?;
        let vpc = self.second_moments(probe, conj)?;
        let var = (mp.transpose() * vpp * mp)[(0, 0)] + (mc.transpose() * vcc * mc)[(0, 0)]
            - 2.0 * (mp.transpose() * vpc * mc)[(0, 0)];
        let snl = mp.norm_squared() + mc.norm_squared();
        Ok(var / snl)
    }

    fn symmetrize(&mut self) {
        let t = self.cov.transpose();
        self.cov = (&self.cov + t) * 0.5;
    }

    /// Checks covariance symmetry and `cov + iΩ ⪰ 0`.
    pub fn check_physical(&self) -> Result<()> {
        let dim = self.dim();
        let scale = self.cov.amax().max(1.0);
        for i in 0..dim {
            for j in 0..i {
                if (self.cov[(i, j)] - self.cov[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::Validation(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min = self.uncertainty_min_eigenvalue();
        if min < -UNCERTAINTY_TOL * scale {
            return Err(Error::Validation(format!(
                "uncertainty principle violated: min eigenvalue of cov + iΩ is {min:.3e}"
            )));
        }
        Ok(())
    }

    /// Smallest eigenvalue of the Hermitian matrix `cov + iΩ`, computed
    /// through its real symmetric embedding `[[V, −Ω], [Ω, V]]`.
    pub fn uncertainty_min_eigenvalue(&self) -> f64 {
        let dim = self.dim();
        let omega = symplectic_form(self.n_modes());
        let mut embed = DMatrix::zeros(2 * dim, 2 * dim);
        embed.view_mut((0, 0), (dim, dim)).copy_from(&self.cov);
        embed.view_mut((dim, dim), (dim, dim)).copy_from(&self.cov);
        embed.view_mut((0, dim), (dim, dim)).copy_from(&(-&omega));
        embed.view_mut((dim, 0), (dim, dim)).copy_from(&omega);
        embed
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Standard symplectic form `⊕ [[0, 1], [−1, 0]]`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Quadrature map of the two-mode squeezer in the basis `(X_p, P_p, X_c, P_c)`.
pub fn two_mode_squeezer_matrix(gain: f64) -> Matrix4<f64> {
    let g = gain.sqrt();
    let h = (gain - 1.0).max(0.0).sqrt();
    #[rustfmt::skip]
    let s = Matrix4::new(
        g,   0.0, h,   0.0,
        0.0, g,   0.0, -h,
        h,   0.0, g,   0.0,
        0.0, -h,  0.0, g,
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pair() -> GaussianState {
        GaussianState::vacuum(&[ModeLabel::probe(0), ModeLabel::conjugate(1)]).unwrap()
    }

    #[test]
    fn vacuum_shapes() {
        let one = GaussianState::vacuum(&[ModeLabel::probe(0)]).unwrap();
        assert_eq!(one.means().as_slice(), &[0.0, 0.0]);
        assert_eq!(one.cov(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(pair().cov(), &DMatrix::<f64>::identity(4, 4));
    }

    #[test]
    fn vacuum_rejects_empty_and_duplicates() {
        assert!(matches!(
            GaussianState::vacuum(&[]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            GaussianState::vacuum(&[ModeLabel::probe(3), ModeLabel::conjugate(3)]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn displacement_convention_and_group_law() {
        let s = pair();
        assert_eq!(s.displace(0, Complex64::new(0.0, 0.0)).unwrap(), s);
        let d = s.displace(0, Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(&d.means().as_slice()[..2], &[2.0, 0.0]);
        assert_eq!(d.cov(), s.cov());

        let a = Complex64::new(0.3, -1.2);
        let b = Complex64::new(-2.0, 0.7);
        let twice = s.displace(1, a).unwrap().displace(1, b).unwrap();
        let once = s.displace(1, a + b).unwrap();
        assert_abs_diff_eq!(twice.means(), once.means(), epsilon = 1e-15);
        assert!(matches!(s.displace(9, a), Err(Error::UnknownMode(9))));
    }

    #[test]
    fn squeezer_identity_and_variances() {
        let s = pair();
        let same = s
            .two_mode_squeeze(0, 1, SqueezerSpec { gain: 1.0 })
            .unwrap();
        assert_abs_diff_eq!(same.cov(), s.cov(), epsilon = 1e-15);

        let out = s
            .two_mode_squeeze(0, 1, SqueezerSpec { gain: 2.0 })
            .unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(out.cov()[(i, i)], 3.0, epsilon = 1e-12);
        }
        // vacuum in, G − 1 photons out of each port
        assert_abs_diff_eq!(out.mean_photon_flux(0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(out.mean_photon_flux(1).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn squeezer_mean_propagation() {
        let alpha = Complex64::new(0.6, 0.8);
        let out = pair()
            .displace(0, alpha)
            .unwrap()
            .two_mode_squeeze(0, 1, SqueezerSpec { gain: 2.0 })
            .unwrap();
        let ap = out.amplitude(0).unwrap();
        let ac = out.amplitude(1).unwrap();
        assert_abs_diff_eq!(ap.re, 2f64.sqrt() * alpha.re, epsilon = 1e-12);
        assert_abs_diff_eq!(ap.im, 2f64.sqrt() * alpha.im, epsilon = 1e-12);
        assert_abs_diff_eq!(ac.re, alpha.conj().re, epsilon = 1e-12);
        assert_abs_diff_eq!(ac.im, alpha.conj().im, epsilon = 1e-12);
    }

    #[test]
    fn squeezer_errors() {
        let s = pair();
        assert!(matches!(
            s.two_mode_squeeze(0, 1, SqueezerSpec { gain: 0.9 }),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            s.two_mode_squeeze(0, 0, SqueezerSpec { gain: 2.0 }),
            Err(Error::Validation(_))
        ));
        assert!(SqueezerSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn loss_limits() {
        let s = pair()
            .displace(0, Complex64::new(10.0, 0.0))
            .unwrap()
            .two_mode_squeeze(0, 1, SqueezerSpec { gain: 3.0 })
            .unwrap();
        assert_eq!(s.beamsplit_loss(0, 1.0).unwrap(), s);
        let dark = s.beamsplit_loss(0, 0.0).unwrap();
        assert_abs_diff_eq!(
            dark.second_moments(0, 0).unwrap(),
            nalgebra::Matrix2::identity(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            dark.second_moments(0, 1).unwrap(),
            nalgebra::Matrix2::zeros(),
            epsilon = 1e-15
        );
        assert_eq!(dark.mean_photon_flux(0).unwrap(), 0.0);
        assert!(matches!(s.beamsplit_loss(0, 1.01), Err(Error::Domain(_))));
        assert!(matches!(s.beamsplit_loss(0, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn loss_keeps_coherent_states_coherent() {
        let s = GaussianState::vacuum(&[ModeLabel::probe(0)])
            .unwrap()
            .displace(0, Complex64::new(5.0, 0.0))
            .unwrap();
        let out = s.beamsplit_loss(0, 0.33).unwrap();
        assert_abs_diff_eq!(
            out.mean_photon_flux(0).unwrap(),
            0.33 * 25.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(out.cov()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.cov()[(1, 1)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn flux_of_vacuum_and_coherent() {
        let s = pair();
        assert_eq!(s.mean_photon_flux(0).unwrap(), 0.0);
        let c = s.displace(1, Complex64::new(3.0, -4.0)).unwrap();
        assert_abs_diff_eq!(c.mean_photon_flux(1).unwrap(), 25.0, epsilon = 1e-12);
        assert!(c.mean_photon_flux(7).is_err());
    }

    #[test]
    fn nsf_preconditions() {
        let s = pair();
        assert!(matches!(
            s.intensity_difference_nsf(0, 1),
            Err(Error::Precondition(_))
        ));
        let sq = s
            .two_mode_squeeze(0, 1, SqueezerSpec { gain: 2.0 })
            .unwrap();
        // vacuum-seeded twin beams carry G − 1 = 1 photon: too dark
        assert!(matches!(
            sq.intensity_difference_nsf(0, 1),
            Err(Error::Precondition(_))
        ));
        // a bright probe next to exact vacuum is fine, a dim one is not
        let bright = s.displace(0, Complex64::new(100.0, 0.0)).unwrap();
        assert_abs_diff_eq!(
            bright.intensity_difference_nsf(0, 1).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            bright.intensity_difference_nsf(1, 0).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let dim = bright.displace(1, Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(
            dim.intensity_difference_nsf(0, 1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn independent_coherent_beams_sit_at_snl() {
        let s = pair()
            .displace(0, Complex64::new(40.0, 3.0))
            .unwrap()
            .displace(1, Complex64::new(-7.0, 22.0))
            .unwrap();
        assert_abs_diff_eq!(
            s.intensity_difference_nsf(0, 1).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(s.single_beam_nsf(0).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn measured_gain_squeezing() {
        let gain = 57.6 / 9.2;
        let s = pair()
            .displace(0, Complex64::new(100.0, 0.0))
            .unwrap()
            .two_mode_squeeze(0, 1, SqueezerSpec { gain })
            .unwrap();
        let nsf = s.intensity_difference_nsf(0, 1).unwrap();
        assert_abs_diff_eq!(nsf, 1.0 / (2.0 * gain - 1.0), epsilon = 1e-12);
        assert!((nsf - 0.0868).abs() < 5e-4);
    }

    #[test]
    fn from_moments_rejects_unphysical() {
        let labels = [ModeLabel::probe(0)];
        let squeezed_too_far = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0]));
        assert!(GaussianState::from_moments(&labels, DVector::zeros(2), squeezed_too_far).is_err());
        let ok = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 2.0]));
        assert!(GaussianState::from_moments(&labels, DVector::zeros(2), ok).is_ok());
        let asym = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.0, 2.0]);
        assert!(GaussianState::from_moments(&labels, DVector::zeros(2), asym).is_err());
    }
}
