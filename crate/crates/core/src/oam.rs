//! Laguerre-Gaussian beams, plane-wave interferograms and topological
//! charge extraction.
//!
//! Grids are square and row-major. Pixel `(row, col)` sits at
//! `x = -extent + (col + ½)·dx`, `y = extent - (row + ½)·dx` with
//! `dx = 2·extent / resolution`, so row 0 is the top of the image and the
//! azimuth `φ = atan2(y, x)` increases counter-clockwise.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_RESOLUTION: usize = 64;
/// Minimum number of fringes a non-zero tilt must put across the aperture.
pub const MIN_FRINGES: f64 = 4.0;
const CAPTURE_WARN: f64 = 0.99;
/// Relative amplitude floor for phase sampling.
const AMPLITUDE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LGModeSpec {
    pub l: i32,
    #[serde(default)]
    pub p: u32,
    pub waist_um: f64,
    pub wavelength_nm: f64,
}

impl LGModeSpec {
    pub fn new(l: i32, waist_um: f64, wavelength_nm: f64) -> Self {
        Self {
            l,
            p: 0,
            waist_um,
            wavelength_nm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.waist_um > 0.0 && self.waist_um.is_finite()) {
            return Err(Error::Validation(format!(
                "waist must be > 0, got {}",
                self.waist_um
            )));
        }
        if !(self.wavelength_nm > 0.0 && self.wavelength_nm.is_finite()) {
            return Err(Error::Validation(format!(
                "wavelength must be > 0, got {}",
                self.wavelength_nm
            )));
        }
        Ok(())
    }

    pub fn rayleigh_range_um(&self) -> f64 {
        PI * self.waist_um * self.waist_um / (self.wavelength_nm * 1e-3)
    }

    pub fn waist_at(&self, z_um: f64) -> f64 {
        self.waist_um * (1.0 + (z_um / self.rayleigh_range_um()).powi(2)).sqrt()
    }

    /// Radius of maximum intensity of the `p = 0` ring.
    pub fn ring_radius_um(&self, z_um: f64) -> f64 {
        self.waist_at(z_um) * (self.l.unsigned_abs() as f64 / 2.0).sqrt()
    }

    /// Complex amplitude at `(x, y, z)`, normalized to unit power.
    pub fn amplitude(&self, x_um: f64, y_um: f64, z_um: f64) -> Complex64 {
        let al = self.l.unsigned_abs();
        let zr = self.rayleigh_range_um();
        let w = self.waist_at(z_um);
        let r2 = x_um * x_um + y_um * y_um;
        let rho = 2.0 * r2 / (w * w);
        let norm = (2.0 * factorial(self.p) / (PI * factorial(self.p + al))).sqrt() / w;
        let radial = norm
            * rho.sqrt().powi(al as i32)
            * generalized_laguerre(self.p, al as f64, rho)
            * (-r2 / (w * w)).exp();
        let k = 2.0 * PI / (self.wavelength_nm * 1e-3);
        let curvature = if z_um == 0.0 {
            0.0
        } else {
            -k * r2 * z_um / (2.0 * (z_um * z_um + zr * zr))
        };
        let gouy = (2 * self.p + al + 1) as f64 * (z_um / zr).atan();
        let phase = self.l as f64 * y_um.atan2(x_um) + curvature + gouy;
        Complex64::from_polar(radial, phase)
    }
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `L_n^a(x)` by the three-term recurrence.
fn generalized_laguerre(n: u32, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Square sampling geometry shared by field maps and images.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub extent_um: f64,
    pub resolution: usize,
}

impl Geometry {
    pub fn new(extent_um: f64, resolution: usize) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::Validation(format!(
                "resolution must be >= {MIN_RESOLUTION}, got {resolution}"
            )));
        }
        if !(extent_um > 0.0 && extent_um.is_finite()) {
            return Err(Error::Validation(format!(
                "extent must be > 0, got {extent_um}"
            )));
        }
        Ok(Self {
            extent_um,
            resolution,
        })
    }

    pub fn pixel_um(&self) -> f64 {
        2.0 * self.extent_um / self.resolution as f64
    }

    pub fn x(&self, col: usize) -> f64 {
        -self.extent_um + (col as f64 + 0.5) * self.pixel_um()
    }

    pub fn y(&self, row: usize) -> f64 {
        self.extent_um - (row as f64 + 0.5) * self.pixel_um()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub geometry: Geometry,
    /// Row-major complex amplitudes.
    pub grid: Vec<Complex64>,
    pub warnings: Vec<String>,
}

impl FieldMap {
    pub fn from_fn(geometry: Geometry, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let n = geometry.resolution;
        let mut grid = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                grid.push(f(geometry.x(col), geometry.y(row)));
            }
        }
        if grid.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Validation("field contains non-finite values".into()));
        }
        Ok(Self {
            geometry,
            grid,
            warnings: Vec::new(),
        })
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.grid[row * self.geometry.resolution + col]
    }

    pub fn power(&self) -> f64 {
        let px = self.geometry.pixel_um();
        self.grid.iter().map(|v| v.norm_sqr()).sum::<f64>() * px * px
    }

    pub fn intensity(&self) -> ImageGrid {
        ImageGrid {
            geometry: self.geometry,
            data: self.grid.iter().map(|v| v.norm_sqr()).collect(),
            warnings: self.warnings.clone(),
        }
    }

    pub fn max_amplitude(&self) -> f64 {
        self.grid.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            geometry: self.geometry,
            grid: self.grid.iter().map(|&v| f(v)).collect(),
            warnings: self.warnings.clone(),
        }
    }

    /// Bilinear interpolation at a physical position.
    fn sample(&self, x: f64, y: f64) -> Option<Complex64> {
        let g = &self.geometry;
        let n = g.resolution;
        let fc = (x + g.extent_um) / g.pixel_um() - 0.5;
        let fr = (g.extent_um - y) / g.pixel_um() - 0.5;
        if fc < 0.0 || fr < 0.0 || fc > (n - 1) as f64 || fr > (n - 1) as f64 {
            return None;
        }
        let c0 = (fc.floor() as usize).min(n - 2);
        let r0 = (fr.floor() as usize).min(n - 2);
        let (tc, tr) = (fc - c0 as f64, fr - r0 as f64);
        let top = self.at(r0, c0) * (1.0 - tc) + self.at(r0, c0 + 1) * tc;
        let bottom = self.at(r0 + 1, c0) * (1.0 - tc) + self.at(r0 + 1, c0 + 1) * tc;
        Some(top * (1.0 - tr) + bottom * tr)
    }
}

/// Non-negative intensity image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub geometry: Geometry,
    pub data: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ImageGrid {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.geometry.resolution + col]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Samples an LG mode on a square grid of half-width `extent_um`.
pub fn lg_field(
    spec: &LGModeSpec,
    extent_um: f64,
    resolution: usize,
    z_um: f64,
) -> Result<FieldMap> {
    spec.validate()?;
    let geometry = Geometry::new(extent_um, resolution)?;
    let mut field = FieldMap::from_fn(geometry, |x, y| spec.amplitude(x, y, z_um))?;
    let captured = field.power();
    if captured < CAPTURE_WARN {
        field.warnings.push(format!(
            "grid captures only {:.4} of the beam power; widen the extent",
            captured
        ));
    }
    Ok(field)
}

/// Transverse wavevector (rad/µm) that puts `fringes` fringes across the
/// full aperture, oriented at `angle_rad` from the x axis.
pub fn tilt_for_fringes(geometry: &Geometry, fringes: f64, angle_rad: f64) -> (f64, f64) {
    let k = 2.0 * PI * fringes / (2.0 * geometry.extent_um);
    (k * angle_rad.cos(), k * angle_rad.sin())
}

fn fringe_count(geometry: &Geometry, tilt: (f64, f64)) -> f64 {
    tilt.0.hypot(tilt.1) * 2.0 * geometry.extent_um / (2.0 * PI)
}

/// `|field + R·exp(i k·r)|²` with the reference amplitude `R` equal to the
/// field's peak amplitude.
pub fn interfere_plane_wave(field: &FieldMap, tilt: (f64, f64)) -> Result<ImageGrid> {
    let g = field.geometry;
    let fringes = fringe_count(&g, tilt);
    let mut warnings = field.warnings.clone();
    if fringes == 0.0 {
        warnings.push("zero tilt: vortex shows as a spiral, not a fork".into());
    } else if fringes < MIN_FRINGES {
        return Err(Error::Precondition(format!(
            "tilt gives {fringes:.2} fringes across the aperture, need >= {MIN_FRINGES}"
        )));
    }
    let reference = field.max_amplitude();
    let n = g.resolution;
    let mut data = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let phase = tilt.0 * g.x(col) + tilt.1 * g.y(row);
            data.push((field.at(row, col) + Complex64::from_polar(reference, phase)).norm_sqr());
        }
    }
    Ok(ImageGrid {
        geometry: g,
        data,
        warnings,
    })
}

/// Phase winding of `field` around a circle of radius
/// `radius_fraction · extent` centred on the grid.
fn winding(field: &FieldMap, radius_fraction: f64) -> Result<i32> {
    let g = &field.geometry;
    let r = radius_fraction * g.extent_um;
    if !(r >= 2.0 * g.pixel_um() && r <= g.extent_um - g.pixel_um()) {
        return Err(Error::Precondition(format!(
            "sampling radius {r:.3} µm must avoid the core and stay inside the grid"
        )));
    }
    let floor = AMPLITUDE_FLOOR * field.max_amplitude();
    let samples = ((2.0 * PI * r / g.pixel_um()) * 8.0).ceil().max(256.0) as usize;
    let point = |k: usize| {
        let phi = 2.0 * PI * k as f64 / samples as f64;
        field.sample(r * phi.cos(), r * phi.sin())
    };
    let first = point(0).ok_or_else(|| Error::Precondition("circle leaves the grid".into()))?;
    let mut prev = first;
    let mut total = 0.0;
    for k in 1..=samples {
        let cur = if k == samples {
            first
        } else {
            point(k).ok_or_else(|| Error::Precondition("circle leaves the grid".into()))?
        };
        if cur.norm() <= floor || prev.norm() <= floor {
            return Err(Error::UndefinedCharge(format!(
                "field amplitude below {floor:.3e} on the sampling circle"
            )));
        }
        total += (cur * prev.conj()).arg();
        prev = cur;
    }
    Ok((total / (2.0 * PI)).round() as i32)
}

/// Topological charge from the circulation of the phase gradient.
pub fn topological_charge(field: &FieldMap, radius_fraction: f64) -> Result<i32> {
    winding(field, radius_fraction)
}

/// Signed order of the fork dislocation at the centre of an interferogram
/// produced with the given tilt. The image is demodulated at the carrier
/// (multiplied by `exp(i k·r)` and Gaussian low-passed), which recovers the
/// vortex field up to a constant; its winding is the dislocation order.
/// The magnitude counts the extra fringes in the fork and the sign gives
/// its orientation.
pub fn fork_dislocation_order(
    image: &ImageGrid,
    tilt: (f64, f64),
    radius_fraction: f64,
) -> Result<i32> {
    let g = image.geometry;
    let fringes = fringe_count(&g, tilt);
    if fringes < MIN_FRINGES {
        return Err(Error::Precondition(format!(
            "cannot demodulate an interferogram with {fringes:.2} fringes"
        )));
    }
    let n = g.resolution;
    let k = tilt.0.hypot(tilt.1);
    // carrier suppression exp(-(kσ)²/2) ≈ 1e-4
    let sigma_px = 4.3 / k / g.pixel_um();
    let mut shifted = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let phase = tilt.0 * g.x(col) + tilt.1 * g.y(row);
            shifted.push(Complex64::from_polar(image.at(row, col), phase));
        }
    }
    let blurred = gaussian_blur(&shifted, n, sigma_px);
    let demodulated = FieldMap {
        geometry: g,
        grid: blurred,
        warnings: Vec::new(),
    };
    winding(&demodulated, radius_fraction)
}

fn gaussian_blur(data: &[Complex64], n: usize, sigma_px: f64) -> Vec<Complex64> {
    let half = (4.0 * sigma_px).ceil() as isize;
    let kernel: Vec<f64> = (-half..=half)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma_px * sigma_px)).exp())
        .collect();
    let pass = |src: &[Complex64], horizontal: bool| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for row in 0..n {
            for col in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut wsum = 0.0;
                for (t, w) in kernel.iter().enumerate() {
                    let off = t as isize - half;
                    let (r, c) = if horizontal {
                        (row as isize, col as isize + off)
                    } else {
                        (row as isize + off, col as isize)
                    };
                    if r < 0 || c < 0 || r >= n as isize || c >= n as isize {
                        continue;
                    }
                    acc += src[r as usize * n + c as usize] * *w;
                    wsum += w;
                }
                out[row * n + col] = acc / wsum;
            }
        }
        out
    };
    let h = pass(data, true);
    pass(&h, false)
}

/// Angular momentum bookkeeping for two pump photons converting into one
/// probe and one conjugate photon.
pub fn check_oam_conservation(l_pump: i32, l_probe: i32, l_conj: i32) -> bool {
    2 * l_pump == l_probe + l_conj
}

/// Charge of the conjugate implied by conservation.
pub fn conjugate_charge(l_pump: i32, l_probe: i32) -> i32 {
    2 * l_pump - l_probe
}

/// Radius (µm) of the brightest pixel, measured from the grid centre.
pub fn peak_radius(image: &ImageGrid) -> f64 {
    let g = image.geometry;
    let n = g.resolution;
    let (k, _) =
        image.data.iter().enumerate().fold(
            (0, f64::MIN),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        );
    g.x(k % n).hypot(g.y(k / n))
}

#[cfg(test)]
mod tests {
    use super::*;

    const W0: f64 = 370.0;
    const LAMBDA: f64 = 894.6;

    fn lg(l: i32, res: usize) -> FieldMap {
        lg_field(&LGModeSpec::new(l, W0, LAMBDA), 4.0 * W0, res, 0.0).unwrap()
    }

    #[test]
    fn laguerre_polynomials() {
        assert_eq!(generalized_laguerre(0, 2.0, 0.7), 1.0);
        assert!((generalized_laguerre(1, 2.0, 0.7) - 2.3).abs() < 1e-15);
        // L_2^1(x) = (x² − 6x + 6)/2
        let x = 1.3;
        assert!((generalized_laguerre(2, 1.0, x) - (x * x - 6.0 * x + 6.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn unit_power() {
        for (l, p) in [(0, 0), (-1, 0), (2, 1), (3, 0)] {
            let spec = LGModeSpec {
                l,
                p,
                waist_um: W0,
                wavelength_nm: LAMBDA,
            };
            let f = lg_field(&spec, 5.0 * W0, 256, 0.0).unwrap();
            assert!((f.power() - 1.0).abs() < 1e-3, "l={l} p={p}: {}", f.power());
            assert!(f.warnings.is_empty());
        }
    }

    #[test]
    fn small_extent_is_flagged() {
        let f = lg_field(&LGModeSpec::new(1, W0, LAMBDA), 1.0 * W0, 64, 0.0).unwrap();
        assert_eq!(f.warnings.len(), 1);
    }

    #[test]
    fn gaussian_peaks_at_centre() {
        let img = lg(0, 128).intensity();
        assert!(peak_radius(&img) <= img.geometry.pixel_um());
    }

    #[test]
    fn donut_radius() {
        let img = lg(-1, 256).intensity();
        let expected = W0 / 2f64.sqrt();
        assert!((peak_radius(&img) - expected).abs() <= img.geometry.pixel_um());
        let centre = img.at(128, 128).max(img.at(127, 127));
        assert!(centre < 1e-2 * img.max());
    }

    #[test]
    fn opposite_charges_conjugate() {
        let a = lg(1, 64);
        let b = lg(-1, 64);
        for (u, v) in a.grid.iter().zip(&b.grid) {
            assert!((u.norm() - v.norm()).abs() < 1e-15);
            assert!((u - v.conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn charges_recovered() {
        assert_eq!(topological_charge(&lg(-1, 128), 0.25).unwrap(), -1);
        assert_eq!(topological_charge(&lg(3, 128), 0.4).unwrap(), 3);
        let plane = FieldMap::from_fn(Geometry::new(100.0, 64).unwrap(), |_, _| {
            Complex64::new(1.0, 0.0)
        })
        .unwrap();
        assert_eq!(topological_charge(&plane, 0.5).unwrap(), 0);
    }

    #[test]
    fn charge_errors() {
        let f = lg(1, 64);
        assert!(matches!(
            topological_charge(&f, 0.999),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            topological_charge(&f, 0.0),
            Err(Error::Precondition(_))
        ));
        let dark = FieldMap::from_fn(f.geometry, |_, _| Complex64::new(0.0, 0.0)).unwrap();
        assert!(matches!(
            topological_charge(&dark, 0.5),
            Err(Error::UndefinedCharge(_))
        ));
    }

    #[test]
    fn forks() {
        for l in [-1, 0, 1, 2] {
            let f = lg(l, 256);
            let tilt = tilt_for_fringes(&f.geometry, 24.0, 0.0);
            let img = interfere_plane_wave(&f, tilt).unwrap();
            assert!(img.data.iter().all(|&v| v >= 0.0));
            assert_eq!(fork_dislocation_order(&img, tilt, 0.25).unwrap(), l);
        }
    }

    #[test]
    fn tilt_preconditions() {
        let f = lg(1, 64);
        let img = interfere_plane_wave(&f, (0.0, 0.0)).unwrap();
        assert_eq!(img.warnings.len(), 1);
        let weak = tilt_for_fringes(&f.geometry, 2.0, 0.3);
        assert!(matches!(
            interfere_plane_wave(&f, weak),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn conservation() {
        assert!(check_oam_conservation(0, -1, 1));
        assert!(check_oam_conservation(0, 0, 0));
        assert!(!check_oam_conservation(0, -1, -1));
        assert!(check_oam_conservation(1, 0, 2));
        assert_eq!(conjugate_charge(0, -1), 1);
    }

    #[test]
    fn geometry_validation() {
        assert!(Geometry::new(10.0, 63).is_err());
        assert!(Geometry::new(0.0, 64).is_err());
        assert!(LGModeSpec::new(0, -1.0, LAMBDA).validate().is_err());
        assert!(LGModeSpec::new(0, 1.0, 0.0).validate().is_err());
    }
}
