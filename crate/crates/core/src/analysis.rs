//! Measurements on simulated or recorded traces: decay rates, oscillation
//! frequency, sideband heights and stationarity. Shared by the command-line
//! scans and the test suites.

use serde::{Deserialize, Serialize};

use crate::bloch::{Component, SimResult};
use crate::analytic::{damping_time_from_gain, effective_t2};
use crate::config::{larmor_frequency, ExperimentConfig};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::fit::{fit_exp_decay, fit_linear, FitResult};
use crate::series::TimeSeries;
use crate::spectral::{amplitude_spectrum_padded, demodulate, Demodulated, Window, PEAK_PAD};

/// Default demodulation bandwidth, Hz.
pub const DEFAULT_LP_CUTOFF: f64 = 1.0;
/// Wider bandwidth used for decay-rate fits, so short records still leave
/// samples after the filter transient, Hz.
pub const RATE_LP_CUTOFF: f64 = 4.0;

/// Larmor frequency of the run, Hz.
pub fn carrier_of(r: &SimResult) -> f64 {
    larmor_frequency(r.meta.config.b0, &r.meta.constants)
}

/// Demodulates the detector channel at the Larmor frequency.
pub fn envelope(r: &SimResult, lp_cutoff: f64) -> Result<Demodulated> {
    demodulate(&r.detected, carrier_of(r), lp_cutoff)
}

/// Exponential fit to the envelope between `t_start` and `t_end`.
pub fn decay_rate(env: &TimeSeries, t_start: f64, t_end: f64) -> Result<FitResult> {
    fit_exp_decay(&env.window(t_start, t_end))
}

/// Oscillation frequency from the phase slope of `series` demodulated at
/// `ref_freq`, using samples from `t_start` on.
pub fn oscillation_frequency(series: &TimeSeries, ref_freq: f64, lp_cutoff: f64, t_start: f64) -> Result<f64> {
    let d = demodulate(series, ref_freq, lp_cutoff)?;
    let ph = d.phase.window(t_start, f64::INFINITY);
    if ph.len() < 2 {
        return Err(Error::InsufficientData("no phase samples after t_start".into()));
    }
    let pts: Vec<(f64, f64)> = ph.times().zip(ph.values.iter().copied()).collect();
    let f = fit_linear(&pts)?;
    Ok(ref_freq + f.params[0] / (2.0 * std::f64::consts::PI))
}

/// Peak-to-peak spread of `env` over its final `fraction`, relative to its mean.
pub fn relative_drift(env: &TimeSeries, fraction: f64) -> Result<f64> {
    let n = env.len();
    let start = ((1.0 - fraction.clamp(0.0, 1.0)) * n as f64) as usize;
    let tail = &env.values[start.min(n)..];
    if tail.len() < 2 {
        return Err(Error::InsufficientData("tail too short".into()));
    }
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok((hi - lo) / mean.abs())
}

/// First time at or after `t_from` where `series` changes sign, linearly
/// interpolated.
pub fn zero_crossing(series: &TimeSeries, t_from: f64) -> Option<f64> {
    let v = &series.values;
    let start = ((t_from - series.t0) / series.dt).ceil().max(0.0) as usize;
    (start..v.len().saturating_sub(1)).find_map(|i| {
        if v[i] == 0.0 {
            Some(series.time(i))
        } else if v[i].signum() != v[i + 1].signum() {
            Some(series.time(i) + series.dt * v[i] / (v[i] - v[i + 1]))
        } else {
            None
        }
    })
}

/// Index and value of the maximum.
pub fn argmax(series: &TimeSeries) -> (usize, f64) {
    series
        .values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineHeight {
    pub k: i64,
    pub freq_hz: f64,
    pub amplitude: f64,
}

/// Heights of the lines `carrier + k nu_ac` in a Hann-windowed, zero-padded
/// amplitude spectrum of `series`.
pub fn sideband_heights(series: &TimeSeries, carrier: f64, nu_ac: f64, orders: &[i64]) -> Result<Vec<LineHeight>> {
    let sp = amplitude_spectrum_padded(series, Window::Hann, PEAK_PAD)?;
    let half = if nu_ac > 0.0 { 0.25 * nu_ac } else { 4.0 / sp.record_s };
    orders
        .iter()
        .map(|&k| {
            let f = carrier + k as f64 * nu_ac;
            let p = sp
                .peak_near(f, half)
                .ok_or_else(|| Error::InsufficientData(format!("no bins near {f} Hz")))?;
            Ok(LineHeight {
                k,
                freq_hz: p.freq,
                amplitude: p.amplitude,
            })
        })
        .collect()
}

/// Per-run figures collected by parameter scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Envelope decay rate fitted from one effective T2 after the start, 1/s.
    pub fitted_rate: f64,
    /// Oscillation frequency over the second half of the run, Hz.
    pub maser_freq: f64,
    /// Carrier height over the second half, V.
    pub carrier_amplitude: f64,
    /// Upper first-order sideband height over the second half, V (0 without drive).
    pub sideband_amplitude: f64,
}

impl RunSummary {
    pub const HEADERS: [&'static str; 4] = ["fitted_rate", "maser_freq", "carrier_amplitude", "sideband_amplitude"];

    pub fn values(&self) -> [f64; 4] {
        [self.fitted_rate, self.maser_freq, self.carrier_amplitude, self.sideband_amplitude]
    }
}

/// Standard analysis applied to every scan point, from the configuration and
/// the detected trace alone. Figures that cannot be measured on a run are NaN.
///
/// The decay rate is fitted over two effective T2 starting one effective T2
/// in; frequency and line heights use the second half of the record.
pub fn summarize(cfg: &ExperimentConfig, c: &PhysicalConstants, detected: &TimeSeries) -> RunSummary {
    let nu0 = larmor_frequency(cfg.b0, c);
    let n = detected.len();
    let half = TimeSeries::new(detected.time(n / 2), detected.dt, detected.values[n / 2..].to_vec(), "V");
    let td = damping_time_from_gain(cfg.chi, cfg.p0, c).unwrap_or(f64::INFINITY);
    let t2e = effective_t2(cfg.t2, td);
    let fitted_rate = demodulate(detected, nu0, RATE_LP_CUTOFF.min(0.45 * nu0))
        .and_then(|d| {
            let a = t2e.max(d.envelope.t0);
            decay_rate(&d.envelope, a, a + 2.0 * t2e)
        })
        .map(|f| f.params[1])
        .unwrap_or(f64::NAN);
    let lp = DEFAULT_LP_CUTOFF.min(0.45 * nu0);
    let maser_freq = oscillation_frequency(&half, nu0, lp, half.t0).unwrap_or(f64::NAN);
    let driven = cfg.nu_ac > 0.0 && cfg.b_ac > 0.0;
    let orders: &[i64] = if driven { &[0, 1] } else { &[0] };
    let lines = sideband_heights(&half, nu0, cfg.nu_ac, orders).unwrap_or_default();
    let height = |k: i64| lines.iter().find(|l| l.k == k).map_or(f64::NAN, |l| l.amplitude);
    RunSummary {
        fitted_rate,
        maser_freq,
        carrier_amplitude: height(0),
        sideband_amplitude: if driven { height(1) } else { 0.0 },
    }
}

/// Transverse polarization magnitude of a run.
pub fn transverse(r: &SimResult) -> TimeSeries {
    r.component(Component::Transverse)
}
