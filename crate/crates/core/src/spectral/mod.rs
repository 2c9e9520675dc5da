//! Fourier analysis of uniformly sampled records.
//!
//! Amplitude spectra are one-sided and window-gain corrected: a unit sinusoid
//! centred on a bin reads 1.0. Power spectral densities are one-sided in
//! units²/Hz and satisfy Parseval's relation against the (windowed) mean square.

mod demod;
mod peaks;

pub use demod::{demodulate, Demodulated};
pub use peaks::{find_peaks, fwhm, Peak};

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Smallest record the spectral routines accept.
pub const MIN_SAMPLES: usize = 16;

/// Zero-padding factor used when peak positions and widths are measured.
pub const PEAK_PAD: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
    Blackman,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        use std::f64::consts::PI;
        // periodic form: exact gain for bin-centred tones
        let x = |i: usize| 2.0 * PI * i as f64 / n as f64;
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * x(i).cos()).collect(),
            Window::Blackman => (0..n)
                .map(|i| 0.42 - 0.5 * x(i).cos() + 0.08 * (2.0 * x(i)).cos())
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
            Window::Blackman => "blackman",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    Amplitude,
    Psd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub freqs: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
    pub window: Window,
    /// Bin spacing, `freqs[1] - freqs[0]`. Smaller than 1/T when zero-padded.
    pub resolution_hz: f64,
    /// Length of the analysed record (or segment), s.
    pub record_s: f64,
    /// Number of averaged segments.
    pub averages: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn nearest_bin(&self, freq: f64) -> usize {
        let i = (freq / self.resolution_hz).round();
        (i.max(0.0) as usize).min(self.len() - 1)
    }

    /// Index and value of the largest bin.
    pub fn argmax(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a })
    }

    /// Largest value within `half_width` Hz of `freq`, refined parabolically.
    pub fn peak_near(&self, freq: f64, half_width: f64) -> Option<Peak> {
        let lo = self.nearest_bin((freq - half_width).max(0.0));
        let hi = self.nearest_bin(freq + half_width);
        let i = (lo..=hi).max_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))?;
        Some(peaks::refine(self, i))
    }
}

fn check_record(series: &TimeSeries) -> Result<()> {
    if series.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples, need at least {MIN_SAMPLES}",
            series.len()
        )));
    }
    if !(series.dt > 0.0) || !series.dt.is_finite() {
        return Err(Error::NonUniformGrid { index: 0 });
    }
    Ok(())
}

fn fft_forward(buf: &mut [Complex64]) {
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(buf.len());
    fft.process(buf);
}

/// Windowed, zero-padded DFT of a real record, one-sided and scaled so that a
/// bin-centred unit cosine gives magnitude 1. Linear in the input.
pub fn complex_spectrum(values: &[f64], window: Window, pad: usize) -> Vec<Complex64> {
    let n = values.len();
    let w = window.coefficients(n);
    let gain: f64 = w.iter().sum();
    let m = n * pad.max(1);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (b, (x, w)) in buf.iter_mut().zip(values.iter().zip(&w)) {
        b.re = x * w;
    }
    fft_forward(&mut buf);
    let half = m / 2;
    buf.truncate(half + 1);
    for (k, b) in buf.iter_mut().enumerate() {
        let edge = k == 0 || (m % 2 == 0 && k == half);
        *b *= if edge { 1.0 } else { 2.0 } / gain;
    }
    buf
}

fn freq_axis(bins: usize, df: f64) -> Vec<f64> {
    (0..bins).map(|k| k as f64 * df).collect()
}

/// One-sided amplitude spectrum without zero padding.
pub fn amplitude_spectrum(series: &TimeSeries, window: Window) -> Result<Spectrum> {
    amplitude_spectrum_padded(series, window, 1)
}

/// One-sided amplitude spectrum of the record zero-padded to `pad` times its length.
pub fn amplitude_spectrum_padded(series: &TimeSeries, window: Window, pad: usize) -> Result<Spectrum> {
    check_record(series)?;
    let pad = pad.max(1);
    let c = complex_spectrum(&series.values, window, pad);
    let df = series.sample_rate() / (series.len() * pad) as f64;
    Ok(Spectrum {
        freqs: freq_axis(c.len(), df),
        values: c.iter().map(|z| z.norm()).collect(),
        kind: SpectrumKind::Amplitude,
        window,
        resolution_hz: df,
        record_s: series.len() as f64 * series.dt,
        averages: 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsdMethod {
    /// Single windowed periodogram of the whole record.
    Periodogram(Window),
    /// Averaged Hann-windowed segments of `segment_len` samples, 50% overlap.
    Welch { segment_len: usize },
}

impl PsdMethod {
    /// Welch segments sized so that about `count` of them fit the record.
    pub fn welch_with_segments(n: usize, count: usize) -> Self {
        PsdMethod::Welch {
            segment_len: (2 * n / (count.max(1) + 1)).max(MIN_SAMPLES),
        }
    }
}

fn periodogram_into(acc: &mut [f64], values: &[f64], w: &[f64], fs: f64) {
    let n = values.len();
    let norm: f64 = w.iter().map(|v| v * v).sum::<f64>() * fs;
    let mut buf: Vec<Complex64> = values
        .iter()
        .zip(w)
        .map(|(x, w)| Complex64::new(x * w, 0.0))
        .collect();
    fft_forward(&mut buf);
    for (k, a) in acc.iter_mut().enumerate() {
        let edge = k == 0 || (n % 2 == 0 && k == n / 2);
        *a += buf[k].norm_sqr() * if edge { 1.0 } else { 2.0 } / norm;
    }
}

/// One-sided power spectral density, units²/Hz.
pub fn psd(series: &TimeSeries, method: PsdMethod) -> Result<Spectrum> {
    check_record(series)?;
    let fs = series.sample_rate();
    let (seg, window) = match method {
        PsdMethod::Periodogram(w) => (series.len(), w),
        PsdMethod::Welch { segment_len } => {
            if segment_len > series.len() {
                return Err(Error::InsufficientData(format!(
                    "segment of {segment_len} samples exceeds record of {}",
                    series.len()
                )));
            }
            if segment_len < MIN_SAMPLES {
                return Err(Error::InsufficientData(format!(
                    "segment of {segment_len} samples, need at least {MIN_SAMPLES}"
                )));
            }
            (segment_len, Window::Hann)
        }
    };
    let w = window.coefficients(seg);
    let bins = seg / 2 + 1;
    let mut acc = vec![0.0; bins];
    let hop = (seg / 2).max(1);
    let mut count = 0;
    let mut start = 0;
    while start + seg <= series.len() {
        periodogram_into(&mut acc, &series.values[start..start + seg], &w, fs);
        count += 1;
        if seg == series.len() {
            break;
        }
        start += hop;
    }
    for a in acc.iter_mut() {
        *a /= count as f64;
    }
    let df = fs / seg as f64;
    Ok(Spectrum {
        freqs: freq_axis(bins, df),
        values: acc,
        kind: SpectrumKind::Psd,
        window,
        resolution_hz: df,
        record_s: seg as f64 * series.dt,
        averages: count,
    })
}
