//! C ABI over `slowbeam`.
//!
//! Every fallible call returns an [`SbStatus`]; on failure the message is
//! available from [`sb_last_error`] on the same thread. Handles are opaque
//! and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use slowbeam::config::{load_config, RunConfig};
use slowbeam::cooling::{CoolingRun, LATE_FRACTION};
use slowbeam::focus::{forward_gain, EnsembleResult};
use slowbeam::{optics, source, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Numerical = 5,
    Panic = 6,
}

/// Resolved run configuration.
pub struct SbConfig {
    inner: RunConfig,
}

/// Trajectory ensemble at one power.
pub struct SbFocusRun {
    inner: EnsembleResult,
}

/// Cavity-cooling evolution at one power.
pub struct SbCoolingRun {
    inner: CoolingRun,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SbStatus {
    match e {
        Error::Config(_) => SbStatus::Config,
        Error::Io { .. } => SbStatus::Io,
        Error::Domain(_) | Error::Table(_) => SbStatus::InvalidArgument,
        Error::Fit { .. } | Error::Integration { .. } | Error::Particle { .. } => SbStatus::Numerical,
    }
}

fn guard<F: FnOnce() -> Result<(), (SbStatus, String)>>(f: F) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside slowbeam".into());
            SbStatus::Panic
        }
    }
}

fn lib(e: Error) -> (SbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SbStatus, String) {
    (SbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), (SbStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SbStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn finite(args: &[f64]) -> Result<(), (SbStatus, String)> {
    if args.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err((SbStatus::InvalidArgument, "arguments must be finite".into()))
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version string, static.
#[no_mangle]
pub extern "C" fn sb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Potential depth in J for volumetric polarizability `alpha_vol` (m³),
/// power (W) and waist (m).
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn sb_dipole_potential_depth(alpha_vol: f64, power: f64, waist: f64, out: *mut f64) -> SbStatus {
    guard(|| {
        finite(&[alpha_vol, power, waist])?;
        if !(waist > 0.0) {
            return Err((SbStatus::InvalidArgument, "waist must be positive".into()));
        }
        write(out, optics::dipole_potential_depth(alpha_vol, power, waist))
    })
}

/// Photons absorbed at the focus during `tau` seconds.
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn sb_photons_absorbed(
    power: f64,
    sigma_abs: f64,
    tau: f64,
    waist: f64,
    wavelength: f64,
    out: *mut f64,
) -> SbStatus {
    guard(|| {
        finite(&[power, sigma_abs, tau, waist, wavelength])?;
        if !(waist > 0.0 && wavelength > 0.0) {
            return Err((SbStatus::InvalidArgument, "waist and wavelength must be positive".into()));
        }
        write(out, optics::photons_absorbed(power, sigma_abs, tau, waist, wavelength))
    })
}

/// Power (W) whose potential depth equals `e_kin` (J).
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn sb_stopping_power(e_kin: f64, alpha_vol: f64, waist: f64, out: *mut f64) -> SbStatus {
    guard(|| {
        finite(&[e_kin, alpha_vol, waist])?;
        if !(alpha_vol > 0.0 && waist > 0.0) {
            return Err((SbStatus::InvalidArgument, "alpha_vol and waist must be positive".into()));
        }
        write(out, optics::stopping_power(e_kin, alpha_vol, waist))
    })
}

/// Speed change (m/s) of a particle at `v` crossing a potential of depth `u` (J).
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn sb_pulsed_deceleration(v: f64, u: f64, mass: f64, out: *mut f64) -> SbStatus {
    guard(|| write(out, optics::pulsed_deceleration(v, u, mass).map_err(lib)?))
}

/// Largest transverse speed (m/s) held by a well of depth `u` (J).
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn sb_transverse_capture_speed(u: f64, mass: f64, out: *mut f64) -> SbStatus {
    guard(|| {
        finite(&[u, mass])?;
        if !(mass > 0.0 && u >= 0.0) {
            return Err((SbStatus::InvalidArgument, "mass must be positive and depth >= 0".into()));
        }
        write(out, optics::transverse_capture_speed(u, mass))
    })
}

/// Photons absorbed on a diametral transit of a continuous focus.
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn sb_transit_photon_dose(
    power: f64,
    waist: f64,
    v: f64,
    sigma_abs: f64,
    wavelength: f64,
    out: *mut f64,
) -> SbStatus {
    guard(|| {
        finite(&[power, waist, v, sigma_abs, wavelength])?;
        if !(waist > 0.0 && v > 0.0 && wavelength > 0.0) {
            return Err((SbStatus::InvalidArgument, "waist, speed and wavelength must be positive".into()));
        }
        write(out, optics::transit_photon_dose(power, waist, v, sigma_abs, wavelength))
    })
}

/// Most probable speed of an effusive source, m/s.
///
/// # Safety
/// `out` must be valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn sb_effusive_speed(mass: f64, temperature: f64, out: *mut f64) -> SbStatus {
    guard(|| write(out, source::effusive_most_probable_speed(mass, temperature).map_err(lib)?))
}

/// All-defaults configuration. Never null.
#[no_mangle]
pub extern "C" fn sb_config_default() -> *mut SbConfig {
    Box::into_raw(Box::new(SbConfig {
        inner: RunConfig::default(),
    }))
}

/// Parse TOML configuration text.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn sb_config_parse(text: *const c_char, out: *mut *mut SbConfig) -> SbStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let inner = RunConfig::parse(text).map_err(lib)?;
        write(out, Box::into_raw(Box::new(SbConfig { inner })))
    })
}

/// Load a configuration file.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn sb_config_load(path: *const c_char, out: *mut *mut SbConfig) -> SbStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let inner = load_config(Path::new(path)).map_err(lib)?;
        write(out, Box::into_raw(Box::new(SbConfig { inner })))
    })
}

/// # Safety
/// `config` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sb_config_set_seed(config: *mut SbConfig, seed: u64) -> SbStatus {
    guard(|| {
        let c = config.as_mut().ok_or_else(|| null("config"))?;
        if seed > i64::MAX as u64 {
            return Err((SbStatus::InvalidArgument, "seed must fit in a signed 64-bit integer".into()));
        }
        c.inner.seed = seed;
        Ok(())
    })
}

/// Resolved configuration as TOML; release with [`sb_string_free`].
///
/// # Safety
/// `config` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sb_config_to_toml(config: *const SbConfig) -> *mut c_char {
    match config.as_ref() {
        Some(c) => CString::new(c.inner.to_toml()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `config` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sb_config_free(config: *mut SbConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Run the `[focus]` ensemble at `power` W; 0 gives the field-free baseline.
///
/// # Safety
/// `config` must come from this library; `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn sb_focus_run(config: *const SbConfig, power: f64, out: *mut *mut SbFocusRun) -> SbStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        finite(&[power])?;
        let inner = c.inner.focus.run(power, c.inner.seed, 0).map_err(lib)?;
        write(out, Box::into_raw(Box::new(SbFocusRun { inner })))
    })
}

/// # Safety
/// `run` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sb_focus_particles(run: *const SbFocusRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.n)
}

/// # Safety
/// `run` must come from this library; `out` valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn sb_focus_hit_fraction(run: *const SbFocusRun, out: *mut f64) -> SbStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        write(out, r.inner.hit_fraction)
    })
}

/// Final velocity of particle `index` into `out[0..3]`.
///
/// # Safety
/// `run` must come from this library; `out` valid for three `double` writes.
#[no_mangle]
pub unsafe extern "C" fn sb_focus_final_velocity(run: *const SbFocusRun, index: usize, out: *mut f64) -> SbStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let o = r
            .inner
            .outcomes
            .get(index)
            .ok_or_else(|| (SbStatus::InvalidArgument, format!("particle index {index} out of range")))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        std::slice::from_raw_parts_mut(out, 3).copy_from_slice(o.final_velocity.as_slice());
        Ok(())
    })
}

/// Hit count ratio of `with_field` over `baseline`.
///
/// # Safety
/// Both runs must come from this library; `out` valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn sb_focus_gain(with_field: *const SbFocusRun, baseline: *const SbFocusRun, out: *mut f64) -> SbStatus {
    guard(|| {
        let w = with_field.as_ref().ok_or_else(|| null("with_field"))?;
        let b = baseline.as_ref().ok_or_else(|| null("baseline"))?;
        write(out, forward_gain(&w.inner, &b.inner).map_err(lib)?)
    })
}

/// # Safety
/// `run` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sb_focus_free(run: *mut SbFocusRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Evolve the `[cooling]` ensemble at `power` W.
///
/// # Safety
/// `config` must come from this library; `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn sb_cooling_run(config: *const SbConfig, power: f64, out: *mut *mut SbCoolingRun) -> SbStatus {
    guard(|| {
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        finite(&[power])?;
        let inner = c.inner.cooling.run(power, c.inner.seed).map_err(lib)?;
        write(out, Box::into_raw(Box::new(SbCoolingRun { inner })))
    })
}

/// Number of recorded trace samples.
///
/// # Safety
/// `run` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn sb_cooling_trace_len(run: *const SbCoolingRun) -> usize {
    run.as_ref().map_or(0, |r| r.inner.trace.len())
}

/// Trace sample `index`: time (s), mean kinetic energy (J), photon number
/// and order parameter. Any output pointer may be null.
///
/// # Safety
/// `run` must come from this library; non-null outputs valid for one write.
#[no_mangle]
pub unsafe extern "C" fn sb_cooling_trace_sample(
    run: *const SbCoolingRun,
    index: usize,
    t: *mut f64,
    ke: *mut f64,
    photons: *mut f64,
    theta: *mut f64,
) -> SbStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        let tr = &r.inner.trace;
        if index >= tr.len() {
            return Err((SbStatus::InvalidArgument, format!("trace index {index} out of range")));
        }
        for (p, v) in [
            (t, tr.time[index]),
            (ke, tr.mean_ke[index]),
            (photons, tr.photon_number[index]),
            (theta, tr.order_param[index]),
        ] {
            if !p.is_null() {
                p.write(v);
            }
        }
        Ok(())
    })
}

/// Late-time mean kinetic energy over the initial one.
///
/// # Safety
/// `run` must come from this library; `out` valid for one `double` write.
#[no_mangle]
pub unsafe extern "C" fn sb_cooling_ke_ratio(run: *const SbCoolingRun, out: *mut f64) -> SbStatus {
    guard(|| {
        let r = run.as_ref().ok_or_else(|| null("run"))?;
        write(out, r.inner.trace.late_ke(LATE_FRACTION) / r.inner.initial.mean_kinetic_energy())
    })
}

/// # Safety
/// `run` must come from this library or be null; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn sb_cooling_free(run: *mut SbCoolingRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
