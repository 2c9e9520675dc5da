//! C ABI over `fms-core`.
//!
//! Objects are opaque heap handles created by `fms_*_new`-style functions and
//! released with the matching `fms_*_free`. Fallible functions return an
//! [`FmsStatus`]; on failure the message is available from
//! [`fms_last_error`] on the same thread until the next failing call.
//! Panics never cross the boundary: they are caught and reported as
//! `FMS_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fms_core::analysis::{summarize, RunSummary};
use fms_core::analytic::gain_from_damping_time;
use fms_core::bessel::bessel_j;
use fms_core::bloch::{integrate_with, SimResult};
use fms_core::config::{modulation_index, validate_config};
use fms_core::floquet::{default_k_max, sideband_spectrum};
use fms_core::metrology::{coupling_limit, field_sensitivity, ResponseModel};
use fms_core::presets::Preset;
use fms_core::series::TimeSeries;
use fms_core::spectral::{amplitude_spectrum_padded, Spectrum, Window};
use fms_core::{Error, ExperimentConfig, PhysicalConstants};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    NumericFailure = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Signal selected by [`fms_simulation_copy`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmsChannel {
    Time = 0,
    Px = 1,
    Py = 2,
    Pz = 3,
    Detected = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FmsWindow {
    Rectangular = 0,
    Hann = 1,
    Blackman = 2,
}

/// Per-run figures; NaN where a figure could not be measured.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmsRunSummary {
    pub fitted_rate: f64,
    pub maser_freq: f64,
    pub carrier_amplitude: f64,
    pub sideband_amplitude: f64,
}

/// Opaque experiment configuration.
pub struct FmsConfig {
    inner: ExperimentConfig,
}

/// Opaque simulation result.
pub struct FmsSimulation {
    inner: SimResult,
}

/// Opaque spectrum.
pub struct FmsSpectrum {
    inner: Spectrum,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FmsStatus {
    match e {
        Error::InvalidConfig(_) => FmsStatus::InvalidConfig,
        Error::Io(_) | Error::Parse { .. } | Error::Json(_) => FmsStatus::Io,
        e if e.is_numeric() => FmsStatus::NumericFailure,
        Error::Truncation { .. } | Error::HalfMaxNotBracketed { .. } | Error::FitInit(_) => FmsStatus::NumericFailure,
        _ => FmsStatus::InvalidArgument,
    }
}

fn fail(status: FmsStatus, msg: impl Into<String>) -> FmsStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics into a status.
fn guard<F>(f: F) -> FmsStatus
where
    F: FnOnce() -> Result<(), FmsStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FmsStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(FmsStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn core_err(e: Error) -> FmsStatus {
    fail(status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, FmsStatus> {
    if p.is_null() {
        return Err(fail(FmsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(FmsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, FmsStatus> {
    p.as_ref()
        .ok_or_else(|| fail(FmsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, FmsStatus> {
    p.as_mut()
        .ok_or_else(|| fail(FmsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], FmsStatus> {
    if p.is_null() {
        return Err(fail(FmsStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn constants() -> PhysicalConstants {
    PhysicalConstants::default()
}

/// Message of the last failure on this thread, or null. Owned by the
/// library; valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn fms_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fms_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn fms_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration. Never null.
#[no_mangle]
pub extern "C" fn fms_config_new() -> *mut FmsConfig {
    Box::into_raw(Box::new(FmsConfig {
        inner: ExperimentConfig::default(),
    }))
}

/// Named configuration (`damping`, `transient`, `stationary`, `driven`, `free-decay`).
#[no_mangle]
pub unsafe extern "C" fn fms_config_preset(name: *const c_char, out: *mut *mut FmsConfig) -> FmsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let preset: Preset = str_arg(name, "name")?.parse().map_err(core_err)?;
        *out = Box::into_raw(Box::new(FmsConfig {
            inner: preset.config(&constants()),
        }));
        Ok(())
    })
}

/// Parses a JSON configuration; missing fields take their defaults.
#[no_mangle]
pub unsafe extern "C" fn fms_config_from_json(json: *const c_char, out: *mut *mut FmsConfig) -> FmsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = ExperimentConfig::from_json_str(str_arg(json, "json")?).map_err(core_err)?;
        *out = Box::into_raw(Box::new(FmsConfig { inner }));
        Ok(())
    })
}

/// JSON text of the configuration; release with [`fms_string_free`].
#[no_mangle]
pub unsafe extern "C" fn fms_config_to_json(cfg: *const FmsConfig) -> *mut c_char {
    let mut s = ptr::null_mut();
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        s = CString::new(cfg.inner.to_json_pretty())
            .expect("JSON has no NUL")
            .into_raw();
        Ok(())
    });
    s
}

/// Sets a numeric field by name, e.g. `"duration"`.
#[no_mangle]
pub unsafe extern "C" fn fms_config_set(cfg: *mut FmsConfig, key: *const c_char, value: f64) -> FmsStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        let key = str_arg(key, "key")?;
        cfg.inner.set_numeric(key, value).map_err(core_err)
    })
}

/// Reads a numeric field by name.
#[no_mangle]
pub unsafe extern "C" fn fms_config_get(cfg: *const FmsConfig, key: *const c_char, out: *mut f64) -> FmsStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let key = str_arg(key, "key")?;
        let out = out_arg(out, "out")?;
        let v = serde_json::to_value(&cfg.inner).map_err(|e| fail(FmsStatus::Io, e.to_string()))?;
        *out = match v.get(key) {
            Some(serde_json::Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
            Some(serde_json::Value::String(s)) if s == "inf" => f64::INFINITY,
            _ => return Err(fail(FmsStatus::InvalidArgument, format!("`{key}` is not a numeric field"))),
        };
        Ok(())
    })
}

/// Sets the feedback gain that gives damping time `td` seconds.
#[no_mangle]
pub unsafe extern "C" fn fms_config_set_damping_time(cfg: *mut FmsConfig, td: f64) -> FmsStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        cfg.inner.chi = gain_from_damping_time(td, cfg.inner.p0, &constants()).map_err(core_err)?;
        Ok(())
    })
}

/// `FMS_STATUS_OK` if the configuration is valid, otherwise
/// `FMS_STATUS_INVALID_CONFIG` with every violation in the error message.
#[no_mangle]
pub unsafe extern "C" fn fms_config_validate(cfg: *const FmsConfig) -> FmsStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let v = validate_config(&cfg.inner);
        if v.is_empty() {
            Ok(())
        } else {
            Err(core_err(Error::InvalidConfig(v)))
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn fms_config_free(cfg: *mut FmsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Integrates the configuration.
#[no_mangle]
pub unsafe extern "C" fn fms_simulate(cfg: *const FmsConfig, out: *mut *mut FmsSimulation) -> FmsStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        let inner = integrate_with(&cfg.inner, &constants()).map_err(core_err)?;
        *out = Box::into_raw(Box::new(FmsSimulation { inner }));
        Ok(())
    })
}

/// Number of output samples; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fms_simulation_len(sim: *const FmsSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.inner.len())
}

/// Output sample spacing, s; NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fms_simulation_dt(sim: *const FmsSimulation) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.inner.dt)
}

/// Copies one channel (an `FmsChannel` value) into `buf`, which must hold
/// [`fms_simulation_len`] values.
#[no_mangle]
pub unsafe extern "C" fn fms_simulation_copy(
    sim: *const FmsSimulation,
    channel: i32,
    buf: *mut f64,
    len: usize,
) -> FmsStatus {
    guard(|| {
        let r = &ref_arg(sim, "sim")?.inner;
        let channel = match channel {
            0 => FmsChannel::Time,
            1 => FmsChannel::Px,
            2 => FmsChannel::Py,
            3 => FmsChannel::Pz,
            4 => FmsChannel::Detected,
            c => return Err(fail(FmsStatus::InvalidArgument, format!("unknown channel {c}"))),
        };
        if buf.is_null() {
            return Err(fail(FmsStatus::NullPointer, "buf is null"));
        }
        if len < r.len() {
            return Err(fail(
                FmsStatus::BufferTooSmall,
                format!("buffer holds {len} values, need {}", r.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(buf, r.len());
        for (i, d) in dst.iter_mut().enumerate() {
            let s = &r.states[i];
            *d = match channel {
                FmsChannel::Time => r.time(i),
                FmsChannel::Px => s.px,
                FmsChannel::Py => s.py,
                FmsChannel::Pz => s.pz,
                FmsChannel::Detected => r.detected.values[i],
            };
        }
        Ok(())
    })
}

/// Standard per-run analysis of a simulation.
#[no_mangle]
pub unsafe extern "C" fn fms_simulation_summary(sim: *const FmsSimulation, out: *mut FmsRunSummary) -> FmsStatus {
    guard(|| {
        let r = &ref_arg(sim, "sim")?.inner;
        let out = out_arg(out, "out")?;
        let RunSummary {
            fitted_rate,
            maser_freq,
            carrier_amplitude,
            sideband_amplitude,
        } = summarize(&r.meta.config, &r.meta.constants, &r.detected);
        *out = FmsRunSummary {
            fitted_rate,
            maser_freq,
            carrier_amplitude,
            sideband_amplitude,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fms_simulation_free(sim: *mut FmsSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Single-sided amplitude spectrum of `n` samples spaced `dt` seconds,
/// tapered by `window` (an `FmsWindow` value) and zero-padded by `pad`.
#[no_mangle]
pub unsafe extern "C" fn fms_amplitude_spectrum(
    values: *const f64,
    n: usize,
    dt: f64,
    window: i32,
    pad: usize,
    out: *mut *mut FmsSpectrum,
) -> FmsStatus {
    guard(|| {
        let v = slice_arg(values, n, "values")?;
        let out = out_arg(out, "out")?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(fail(FmsStatus::InvalidArgument, format!("dt must be positive, got {dt}")));
        }
        let w = match window {
            0 => Window::Rectangular,
            1 => Window::Hann,
            2 => Window::Blackman,
            w => return Err(fail(FmsStatus::InvalidArgument, format!("unknown window {w}"))),
        };
        let series = TimeSeries::new(0.0, dt, v.to_vec(), "");
        let inner = amplitude_spectrum_padded(&series, w, pad.max(1)).map_err(core_err)?;
        *out = Box::into_raw(Box::new(FmsSpectrum { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fms_spectrum_len(spec: *const FmsSpectrum) -> usize {
    spec.as_ref().map_or(0, |s| s.inner.len())
}

/// Copies frequencies and values; either buffer may be null to skip it.
#[no_mangle]
pub unsafe extern "C" fn fms_spectrum_copy(
    spec: *const FmsSpectrum,
    freqs: *mut f64,
    values: *mut f64,
    len: usize,
) -> FmsStatus {
    guard(|| {
        let s = &ref_arg(spec, "spec")?.inner;
        if len < s.len() {
            return Err(fail(
                FmsStatus::BufferTooSmall,
                format!("buffer holds {len} values, need {}", s.len()),
            ));
        }
        if !freqs.is_null() {
            std::slice::from_raw_parts_mut(freqs, s.len()).copy_from_slice(&s.freqs);
        }
        if !values.is_null() {
            std::slice::from_raw_parts_mut(values, s.len()).copy_from_slice(&s.values);
        }
        Ok(())
    })
}

/// Interpolated peak within `half_width` Hz of `freq`.
#[no_mangle]
pub unsafe extern "C" fn fms_spectrum_peak(
    spec: *const FmsSpectrum,
    freq: f64,
    half_width: f64,
    peak_freq: *mut f64,
    peak_amplitude: *mut f64,
) -> FmsStatus {
    guard(|| {
        let s = &ref_arg(spec, "spec")?.inner;
        let f = out_arg(peak_freq, "peak_freq")?;
        let a = out_arg(peak_amplitude, "peak_amplitude")?;
        let p = s
            .peak_near(freq, half_width)
            .ok_or_else(|| fail(FmsStatus::InvalidArgument, format!("no bins within {half_width} Hz of {freq} Hz")))?;
        *f = p.freq;
        *a = p.amplitude;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn fms_spectrum_free(spec: *mut FmsSpectrum) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Bessel function of the first kind, integer order.
#[no_mangle]
pub extern "C" fn fms_bessel_j(n: i64, x: f64) -> f64 {
    catch_unwind(|| bessel_j(n, x)).unwrap_or(f64::NAN)
}

/// Modulation index `|gamma| b_ac / nu_ac` for xenon-129.
#[no_mangle]
pub unsafe extern "C" fn fms_modulation_index(b_ac: f64, nu_ac: f64, out: *mut f64) -> FmsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = modulation_index(b_ac, nu_ac, &constants()).map_err(core_err)?;
        Ok(())
    })
}

/// Number of sideband lines above `threshold` of the tallest for a drive.
#[no_mangle]
pub unsafe extern "C" fn fms_sideband_count(b_ac: f64, nu_ac: f64, threshold: f64, out: *mut usize) -> FmsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = constants();
        let m = modulation_index(b_ac, nu_ac, &c).map_err(core_err)?;
        let model = sideband_spectrum(0.0, nu_ac, b_ac, default_k_max(m), &c).map_err(core_err)?;
        *out = model.count_above(threshold);
        Ok(())
    })
}

/// Field sensitivity `noise nu / kappa`, T/sqrt(Hz).
#[no_mangle]
pub unsafe extern "C" fn fms_field_sensitivity(noise: f64, kappa: f64, nu: f64, out: *mut f64) -> FmsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if kappa.is_nan() || kappa <= 0.0 {
            return Err(fail(FmsStatus::InvalidArgument, format!("kappa must be positive, got {kappa}")));
        }
        *out = field_sensitivity(noise, &ResponseModel::with_kappa(kappa), nu).map_err(core_err)?;
        Ok(())
    })
}

/// Coupling limit after `t_m` seconds of integration.
#[no_mangle]
pub unsafe extern "C" fn fms_coupling_limit(sensitivity: f64, t_m: f64, out: *mut f64) -> FmsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = coupling_limit(sensitivity, t_m).map_err(core_err)?;
        Ok(())
    })
}
