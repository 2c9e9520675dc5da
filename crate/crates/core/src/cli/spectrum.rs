use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde_json::json;

use super::{finish, prepare_out_dir, Report, RunManifest};
use crate::error::{Error, Result};
use crate::io::{read_time_series, sidecar_path, write_peaks, write_spectrum};
use crate::spectral::{amplitude_spectrum_padded, find_peaks, fwhm, psd, Peak, PsdMethod, Spectrum, Window};

pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const PEAKS_FILE: &str = "peaks.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Rect,
    Hann,
    Blackman,
}

impl From<WindowArg> for Window {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::Rect => Window::Rectangular,
            WindowArg::Hann => Window::Hann,
            WindowArg::Blackman => Window::Blackman,
        }
    }
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Input CSV with a `t` column.
    #[arg(long)]
    pub input: PathBuf,
    /// Value column; defaults to `detected_v`, else the first non-time column.
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, value_enum, default_value_t = WindowArg::Rect)]
    pub window: WindowArg,
    /// Zero-padding factor of the amplitude spectrum.
    #[arg(long, default_value_t = crate::spectral::PEAK_PAD)]
    pub pad: usize,
    /// Power spectral density instead of an amplitude spectrum.
    #[arg(long)]
    pub psd: bool,
    /// Welch segment length in samples (implies --psd).
    #[arg(long)]
    pub welch_segment: Option<usize>,
    /// Report peaks above this fraction of the tallest.
    #[arg(long, default_value_t = 0.01)]
    pub threshold: f64,
    /// Minimum peak separation, Hz. Defaults to four resolution bins.
    #[arg(long)]
    pub min_sep: Option<f64>,
    /// Drive frequency; peaks are labelled with their sideband order.
    #[arg(long)]
    pub nu_ac: Option<f64>,
    /// Carrier for the labels; defaults to the tallest peak.
    #[arg(long)]
    pub carrier: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Sideband order of each peak lying within one record bin of
/// `carrier + k nu_ac`.
pub fn label_orders(peaks: &mut [Peak], carrier: f64, nu_ac: f64, tolerance: f64) {
    for p in peaks {
        let k = ((p.freq - carrier) / nu_ac).round();
        p.order_k = ((p.freq - carrier - k * nu_ac).abs() <= tolerance).then_some(k as i64);
    }
}

pub fn run(a: &SpectrumArgs, args: &[String]) -> Result<Report> {
    let started = Instant::now();
    let series = read_time_series(&a.input, a.column.as_deref())?;
    let window: Window = a.window.into();
    let spec: Spectrum = match (a.psd, a.welch_segment) {
        (_, Some(segment_len)) => psd(&series, PsdMethod::Welch { segment_len })?,
        (true, None) => psd(&series, PsdMethod::Periodogram(window))?,
        (false, None) => amplitude_spectrum_padded(&series, window, a.pad.max(1))?,
    };
    let bin = 1.0 / spec.record_s;
    let mut peaks = find_peaks(&spec, a.threshold, a.min_sep.unwrap_or(4.0 * bin));
    for p in &mut peaks {
        p.fwhm = fwhm(&spec, p).ok();
    }
    if let Some(nu_ac) = a.nu_ac {
        if !(nu_ac > 0.0) {
            return Err(Error::Domain(format!("--nu-ac must be positive, got {nu_ac}")));
        }
        let carrier = a.carrier.or_else(|| {
            peaks
                .iter()
                .max_by(|x, y| x.amplitude.total_cmp(&y.amplitude))
                .map(|p| p.freq)
        });
        if let Some(carrier) = carrier {
            label_orders(&mut peaks, carrier, nu_ac, bin);
        }
    }

    prepare_out_dir(&a.out)?;
    let spec_path = a.out.join(SPECTRUM_FILE);
    let peaks_path = a.out.join(PEAKS_FILE);
    write_spectrum(&spec_path, &spec, a.input.to_str())?;
    write_peaks(&peaks_path, &peaks)?;

    let mut m = RunManifest::new("spectrum", args);
    m.inputs = vec![a.input.clone()];
    m.outputs = vec![spec_path.clone(), sidecar_path(&spec_path), peaks_path];
    finish(m, &a.out, started)?;

    let top = peaks.iter().max_by(|x, y| x.amplitude.total_cmp(&y.amplitude));
    Ok(Report::new(json!({
        "spectrum": spec_path,
        "window": spec.window.name(),
        "bins": spec.len(),
        "resolution_hz": spec.resolution_hz,
        "record_s": spec.record_s,
        "peaks": peaks.len(),
        "top_freq_hz": top.map(|p| p.freq),
        "top_amplitude": top.map(|p| p.amplitude),
        "top_fwhm_hz": top.and_then(|p| p.fwhm),
        "peak_list": peaks,
    })))
}
