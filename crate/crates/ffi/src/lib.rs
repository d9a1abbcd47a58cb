//! C ABI over the `twinbeam` library.
//!
//! Every fallible function returns a [`TbStatus`]; on failure the message is
//! available from [`tb_last_error`] on the same thread. Objects are opaque
//! handles created by `*_new`-style functions and released with the matching
//! `*_free`. Results are written through caller-provided out pointers, which
//! are left untouched on failure. Panics never cross the boundary.
//!
//! # Safety
//!
//! The same contract holds for every `unsafe` function here. Handle
//! arguments must be null or come from this library and not yet be freed.
//! Out pointers must be null or valid for a write of their type. Null is
//! reported as `NullPointer` (and ignored by the `*_free` functions). Enum
//! arguments and fields must hold one of the declared values. A handle must
//! not be used from two threads at once.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;
use twinbeam::channel::{
    fit_channel, nonamplifying_window, seeded_pair, CascadeSpec, ChannelSpec, FitFamily,
    GainCurveModel, GainPair, LossPlacement, LumpedChannelSpec,
};
use twinbeam::detection::{optimize_probe_attenuation, to_decibel, DetectionChain};
use twinbeam::gaussian::{GaussianState, SqueezerSpec};
use twinbeam::oam::{self, LGModeSpec};
use twinbeam::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Domain = 3,
    UnknownMode = 4,
    Precondition = 5,
    UndefinedCharge = 6,
    /// The fit converged but missed its targets.
    Unreachable = 7,
    Panic = 99,
}

impl From<&Error> for TbStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Validation(_) => TbStatus::Validation,
            Error::Domain(_) => TbStatus::Domain,
            Error::UnknownMode(_) => TbStatus::UnknownMode,
            Error::Precondition(_) => TbStatus::Precondition,
            Error::UndefinedCharge(_) => TbStatus::UndefinedCharge,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), (TbStatus, String)>) -> TbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TbStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TbStatus::Panic
        }
    }
}

fn lift<T>(r: twinbeam::Result<T>) -> Result<T, (TbStatus, String)> {
    r.map_err(|e| (TbStatus::from(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (TbStatus, String)> {
    p.as_ref()
        .ok_or_else(|| (TbStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (TbStatus, String)> {
    p.as_mut()
        .ok_or_else(|| (TbStatus::NullPointer, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), (TbStatus, String)> {
    *deref_mut(out, what)? = value;
    Ok(())
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn tb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque Gaussian state of a probe/conjugate pair.
pub struct TbState(GaussianState);

/// Opaque gain-versus-detuning model.
pub struct TbGainCurve(GainCurveModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbGainPair {
    pub g_p: f64,
    pub g_c: f64,
}

impl From<GainPair> for TbGainPair {
    fn from(g: GainPair) -> Self {
        Self {
            g_p: g.g_p,
            g_c: g.g_c,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbChannelFamily {
    Ideal = 0,
    LossBeforeGain = 1,
    LossAfterGain = 2,
    Cascade = 3,
}

/// Flat channel description. Fields not used by `family` are ignored:
/// `gain` for the lumped families and ideal, `eta_*` for the lumped
/// families, `steps`, `gamma_total` and `alpha_*_total` for the cascade.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbChannelParams {
    pub family: TbChannelFamily,
    pub gain: f64,
    pub eta_probe: f64,
    pub eta_conj: f64,
    pub steps: usize,
    pub gamma_total: f64,
    pub alpha_probe_total: f64,
    pub alpha_conj_total: f64,
}

impl TbChannelParams {
    fn empty(family: TbChannelFamily) -> Self {
        Self {
            family,
            gain: 1.0,
            eta_probe: 1.0,
            eta_conj: 1.0,
            steps: 0,
            gamma_total: 0.0,
            alpha_probe_total: 0.0,
            alpha_conj_total: 0.0,
        }
    }

    fn to_spec(self) -> twinbeam::Result<ChannelSpec> {
        let lumped = |placement| {
            ChannelSpec::Lumped(LumpedChannelSpec {
                gain: self.gain,
                eta_probe: self.eta_probe,
                eta_conj: self.eta_conj,
                placement,
            })
        };
        let spec = match self.family {
            TbChannelFamily::Ideal => ChannelSpec::Ideal(SqueezerSpec::new(self.gain)?),
            TbChannelFamily::LossBeforeGain => lumped(LossPlacement::LossBeforeGain),
            TbChannelFamily::LossAfterGain => lumped(LossPlacement::LossAfterGain),
            TbChannelFamily::Cascade => ChannelSpec::Cascade(CascadeSpec {
                steps: self.steps,
                gamma_total: self.gamma_total,
                alpha_probe_total: self.alpha_probe_total,
                alpha_conj_total: self.alpha_conj_total,
            }),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn from_spec(spec: &ChannelSpec) -> Self {
        match *spec {
            ChannelSpec::Ideal(s) => Self {
                gain: s.gain,
                ..Self::empty(TbChannelFamily::Ideal)
            },
            ChannelSpec::Lumped(l) => Self {
                gain: l.gain,
                eta_probe: l.eta_probe,
                eta_conj: l.eta_conj,
                ..Self::empty(match l.placement {
                    LossPlacement::LossBeforeGain => TbChannelFamily::LossBeforeGain,
                    LossPlacement::LossAfterGain => TbChannelFamily::LossAfterGain,
                })
            },
            ChannelSpec::Cascade(c) => Self {
                steps: c.steps,
                gamma_total: c.gamma_total,
                alpha_probe_total: c.alpha_probe_total,
                alpha_conj_total: c.alpha_conj_total,
                ..Self::empty(TbChannelFamily::Cascade)
            },
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbAttenuationOptimum {
    pub t_star: f64,
    pub nsf_star: f64,
    pub nsf_star_db: f64,
    pub nsf_unattenuated: f64,
    pub dense_fallback: bool,
}

/// Creates a vacuum probe (mode 0) and conjugate (mode 1) pair, the probe
/// carrying topological charge `probe_charge`. Free with [`tb_state_free`].
#[no_mangle]
pub unsafe extern "C" fn tb_state_new_pair(probe_charge: i32, out: *mut *mut TbState) -> TbStatus {
    guard(|| {
        let (state, _, _) = lift(seeded_pair(Complex64::new(0.0, 0.0), probe_charge))?;
        put(out, Box::into_raw(Box::new(TbState(state))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn tb_state_clone(state: *const TbState, out: *mut *mut TbState) -> TbStatus {
    guard(|| {
        let s = deref(state, "state")?;
        put(out, Box::into_raw(Box::new(TbState(s.0.clone()))), "out")
    })
}

/// Releases a state. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn tb_state_free(state: *mut TbState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

fn update(
    state: *mut TbState,
    f: impl FnOnce(&GaussianState) -> twinbeam::Result<GaussianState>,
) -> TbStatus {
    guard(|| {
        let s = unsafe { deref_mut(state, "state")? };
        s.0 = lift(f(&s.0))?;
        Ok(())
    })
}

/// Adds the coherent amplitude `re + i·im` to `mode`.
#[no_mangle]
pub unsafe extern "C" fn tb_state_displace(
    state: *mut TbState,
    mode: usize,
    re: f64,
    im: f64,
) -> TbStatus {
    update(state, |s| s.displace(mode, Complex64::new(re, im)))
}

#[no_mangle]
pub unsafe extern "C" fn tb_state_two_mode_squeeze(
    state: *mut TbState,
    probe: usize,
    conj: usize,
    gain: f64,
) -> TbStatus {
    update(state, |s| {
        s.two_mode_squeeze(probe, conj, SqueezerSpec::new(gain)?)
    })
}

/// Beam-splitter loss with transmission `eta` on `mode`.
#[no_mangle]
pub unsafe extern "C" fn tb_state_loss(state: *mut TbState, mode: usize, eta: f64) -> TbStatus {
    update(state, |s| s.beamsplit_loss(mode, eta))
}

/// Propagates the state through a channel acting on `probe` and `conj`.
#[no_mangle]
pub unsafe extern "C" fn tb_state_apply_channel(
    state: *mut TbState,
    params: *const TbChannelParams,
    probe: usize,
    conj: usize,
) -> TbStatus {
    let spec = match guard_value(|| lift(deref(params, "params")?.to_spec())) {
        Ok(s) => s,
        Err(status) => return status,
    };
    update(state, |s| spec.apply(s, probe, conj))
}

fn guard_value<T>(f: impl FnOnce() -> Result<T, (TbStatus, String)>) -> Result<T, TbStatus> {
    let mut slot = None;
    let status = guard(|| {
        slot = Some(f()?);
        Ok(())
    });
    slot.ok_or(status)
}

fn query(
    state: *const TbState,
    out: *mut f64,
    f: impl FnOnce(&GaussianState) -> twinbeam::Result<f64>,
) -> TbStatus {
    guard(|| {
        let s = unsafe { deref(state, "state")? };
        let v = lift(f(&s.0))?;
        unsafe { put(out, v, "out") }
    })
}

/// Mean photon flux of `mode`.
#[no_mangle]
pub unsafe extern "C" fn tb_state_flux(
    state: *const TbState,
    mode: usize,
    out: *mut f64,
) -> TbStatus {
    query(state, out, |s| s.mean_photon_flux(mode))
}

/// Intensity-noise factor of one beam relative to its shot noise.
#[no_mangle]
pub unsafe extern "C" fn tb_state_single_beam_nsf(
    state: *const TbState,
    mode: usize,
    out: *mut f64,
) -> TbStatus {
    query(state, out, |s| s.single_beam_nsf(mode))
}

/// Intensity-difference noise factor (linear) of two bright beams.
#[no_mangle]
pub unsafe extern "C" fn tb_state_difference_nsf(
    state: *const TbState,
    probe: usize,
    conj: usize,
    out: *mut f64,
) -> TbStatus {
    query(state, out, |s| s.intensity_difference_nsf(probe, conj))
}

/// Optimal probe transmission in `[t_lo, t_hi]` after detection with the
/// given quantum efficiency and electronic noise (in shot-noise units).
#[no_mangle]
pub unsafe extern "C" fn tb_optimize_attenuation(
    state: *const TbState,
    probe: usize,
    conj: usize,
    quantum_efficiency: f64,
    electronic_noise: f64,
    t_lo: f64,
    t_hi: f64,
    out: *mut TbAttenuationOptimum,
) -> TbStatus {
    guard(|| {
        let s = deref(state, "state")?;
        let chain = DetectionChain {
            quantum_efficiency,
            electronic_noise,
            ..DetectionChain::default()
        };
        let o = lift(optimize_probe_attenuation(
            &s.0,
            probe,
            conj,
            &chain,
            (t_lo, t_hi),
        ))?;
        put(
            out,
            TbAttenuationOptimum {
                t_star: o.t_star,
                nsf_star: o.nsf_star,
                nsf_star_db: o.nsf_star_db,
                nsf_unattenuated: o.nsf_unattenuated,
                dense_fallback: o.dense_fallback,
            },
            "out",
        )
    })
}

/// Probe and conjugate gains of a unit seed through the channel.
#[no_mangle]
pub unsafe extern "C" fn tb_channel_gains(
    params: *const TbChannelParams,
    out: *mut TbGainPair,
) -> TbStatus {
    guard(|| {
        let spec = lift(deref(params, "params")?.to_spec())?;
        put(out, lift(spec.gains())?.into(), "out")
    })
}

/// Fits a channel of `family` to the gains, and to `target_nsf` (linear)
/// unless it is NaN. `steps` is used only by the cascade. When the fit
/// misses its targets the parameters are still written and the call returns
/// `Unreachable`.
#[no_mangle]
pub unsafe extern "C" fn tb_fit_channel(
    g_p: f64,
    g_c: f64,
    target_nsf: f64,
    family: TbChannelFamily,
    steps: usize,
    out: *mut TbChannelParams,
    out_residual: *mut f64,
) -> TbStatus {
    guard(|| {
        deref_mut(out, "out")?;
        deref_mut(out_residual, "out_residual")?;
        let fam = match family {
            TbChannelFamily::Ideal => FitFamily::Ideal,
            TbChannelFamily::LossBeforeGain => FitFamily::LossBeforeGain,
            TbChannelFamily::LossAfterGain => FitFamily::LossAfterGain,
            TbChannelFamily::Cascade => FitFamily::Cascade { steps },
        };
        let nsf = (!target_nsf.is_nan()).then_some(target_nsf);
        let fit = lift(fit_channel(lift(GainPair::new(g_p, g_c))?, nsf, fam))?;
        *out = TbChannelParams::from_spec(&fit.spec);
        *out_residual = fit.residual;
        if fit.reachable {
            Ok(())
        } else {
            Err((
                TbStatus::Unreachable,
                format!("targets not reachable, residual {:.3e}", fit.residual),
            ))
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn tb_to_decibel(linear: f64, out: *mut f64) -> TbStatus {
    guard(|| put(out, lift(to_decibel(linear))?, "out"))
}

#[no_mangle]
pub extern "C" fn tb_from_decibel(db: f64) -> f64 {
    twinbeam::detection::from_decibel(db)
}

/// Default calibrated gain curves. Free with [`tb_gain_curve_free`].
#[no_mangle]
pub unsafe extern "C" fn tb_gain_curve_new_default(out: *mut *mut TbGainCurve) -> TbStatus {
    guard(|| {
        put(
            out,
            Box::into_raw(Box::new(TbGainCurve(GainCurveModel::default()))),
            "out",
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn tb_gain_curve_free(curve: *mut TbGainCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Gains at `delta_mhz`. `out_extrapolated` may be null.
#[no_mangle]
pub unsafe extern "C" fn tb_gain_curve_evaluate(
    curve: *const TbGainCurve,
    delta_mhz: f64,
    out: *mut TbGainPair,
    out_extrapolated: *mut bool,
) -> TbStatus {
    guard(|| {
        let c = deref(curve, "curve")?;
        let s = c.0.evaluate(delta_mhz);
        put(out, s.gains.into(), "out")?;
        if let Some(e) = out_extrapolated.as_mut() {
            *e = s.extrapolated;
        }
        Ok(())
    })
}

/// Longest detuning interval where the total gain lies in [0.95, 1].
/// Returns `Domain` when there is none.
#[no_mangle]
pub unsafe extern "C" fn tb_gain_curve_window(
    curve: *const TbGainCurve,
    out_lo_mhz: *mut f64,
    out_hi_mhz: *mut f64,
) -> TbStatus {
    guard(|| {
        let c = deref(curve, "curve")?;
        deref_mut(out_lo_mhz, "out_lo_mhz")?;
        deref_mut(out_hi_mhz, "out_hi_mhz")?;
        let w = nonamplifying_window(&c.0)
            .ok_or_else(|| (TbStatus::Domain, "no non-amplifying window".to_string()))?;
        *out_lo_mhz = w.lo_mhz;
        *out_hi_mhz = w.hi_mhz;
        Ok(())
    })
}

/// Topological charge recovered from the phase winding of a sampled
/// Laguerre-Gaussian field (half-width `extent_um`, `resolution` pixels).
#[no_mangle]
pub unsafe extern "C" fn tb_lg_charge(
    l: i32,
    p: u32,
    waist_um: f64,
    wavelength_nm: f64,
    extent_um: f64,
    resolution: usize,
    radius_fraction: f64,
    out: *mut i32,
) -> TbStatus {
    guard(|| {
        let spec = LGModeSpec {
            l,
            p,
            waist_um,
            wavelength_nm,
        };
        let field = lift(oam::lg_field(&spec, extent_um, resolution, 0.0))?;
        put(
            out,
            lift(oam::topological_charge(&field, radius_fraction))?,
            "out",
        )
    })
}

/// Fork dislocation order of the interferogram of an LG field with a tilted
/// plane wave putting `fringes` fringes across the aperture.
#[no_mangle]
pub unsafe extern "C" fn tb_fork_order(
    l: i32,
    waist_um: f64,
    wavelength_nm: f64,
    extent_um: f64,
    resolution: usize,
    fringes: f64,
    radius_fraction: f64,
    out: *mut i32,
) -> TbStatus {
    guard(|| {
        let spec = LGModeSpec::new(l, waist_um, wavelength_nm);
        let field = lift(oam::lg_field(&spec, extent_um, resolution, 0.0))?;
        let tilt = oam::tilt_for_fringes(&field.geometry, fringes, 0.0);
        let image = lift(oam::interfere_plane_wave(&field, tilt))?;
        put(
            out,
            lift(oam::fork_dislocation_order(&image, tilt, radius_fraction))?,
            "out",
        )
    })
}

#[no_mangle]
pub extern "C" fn tb_check_oam_conservation(l_pump: i32, l_probe: i32, l_conj: i32) -> bool {
    oam::check_oam_conservation(l_pump, l_probe, l_conj)
}

#[no_mangle]
pub extern "C" fn tb_conjugate_charge(l_pump: i32, l_probe: i32) -> i32 {
    oam::conjugate_charge(l_pump, l_probe)
}
