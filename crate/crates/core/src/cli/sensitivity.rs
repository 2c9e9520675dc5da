use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde_json::json;

use super::scan::parse_values;
use super::{finish, prepare_out_dir, Report, RunManifest};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::io::{read_time_series, write_axion_reach, write_sensitivity};
use crate::metrology::{
    axion_reach, noise_floor, AxionParams, ResponseModel, SensitivityCurve, C_B_DEFAULT, KAPPA_QUOTED,
    NOISE_FLOOR_MEASURED,
};
use crate::spectral::{psd, PsdMethod};

pub const CURVE_FILE: &str = "sensitivity.csv";
pub const REACH_FILE: &str = "axion_reach.csv";
/// Welch segments used when the noise floor comes from a record.
pub const RECORD_SEGMENTS: usize = 8;

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// White-noise floor of the sideband channel, V/sqrt(Hz).
    #[arg(long, conflicts_with = "record")]
    pub noise: Option<f64>,
    /// Measure the floor from this record instead (CSV with a `t` column).
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    /// Frequency band `lo:hi` (Hz) left out of the floor estimate. Repeatable.
    #[arg(long = "exclude", value_name = "LO:HI")]
    pub exclude: Vec<String>,
    /// Sideband response, V Hz/nT.
    #[arg(long, default_value_t = KAPPA_QUOTED)]
    pub kappa: f64,
    /// Frequency grid `start:stop:count`, geometric, Hz.
    #[arg(long, default_value = "1e-3:1:31", conflicts_with = "freqs")]
    pub grid: String,
    /// Explicit comma-separated frequencies, Hz.
    #[arg(long)]
    pub freqs: Option<String>,
    /// Axion masses, eV; defaults to the masses of the grid frequencies.
    #[arg(long)]
    pub masses: Option<String>,
    /// Measurement time, s.
    #[arg(long, default_value_t = 1e4)]
    pub t_m: f64,
    /// Use the quoted 2.7e-5 nu GeV^-1/sqrt(Hz) law for the reach.
    #[arg(long)]
    pub quoted_constants: bool,
    /// Field per unit coupling, T GeV.
    #[arg(long, default_value_t = C_B_DEFAULT)]
    pub c_b: f64,
    /// Nuclear g-factor.
    #[arg(long, default_value_t = crate::constants::G_N_XE, allow_hyphen_values = true)]
    pub g_n: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn band(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::Domain(format!("`{s}` is not LO:HI"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

pub fn run(a: &SensitivityArgs, args: &[String], c: &PhysicalConstants) -> Result<Report> {
    let started = Instant::now();
    let model = ResponseModel::with_kappa(a.kappa);
    let grid = match &a.freqs {
        Some(f) => parse_values(None, Some(f), false)?,
        None => parse_values(Some(&a.grid), None, true)?,
    };
    let (curve, inputs) = match &a.record {
        Some(path) => {
            let s = read_time_series(path, a.column.as_deref())?;
            let spec = psd(&s, PsdMethod::welch_with_segments(s.len(), RECORD_SEGMENTS))?;
            let excl = a.exclude.iter().map(|e| band(e)).collect::<Result<Vec<_>>>()?;
            let floor = noise_floor(&spec, &excl)?;
            (SensitivityCurve::measured(floor, &model, &grid)?, vec![path.clone()])
        }
        None => {
            let noise = a.noise.unwrap_or(NOISE_FLOOR_MEASURED);
            (SensitivityCurve::modeled(noise, &model, &grid)?, Vec::new())
        }
    };
    let masses = match &a.masses {
        Some(m) => parse_values(None, Some(m), false)?,
        None => curve.points.iter().map(|(f, _)| c.hz_to_ev(*f)).collect(),
    };
    let params = AxionParams {
        c_b: a.c_b,
        g_n: a.g_n,
        ..Default::default()
    };
    let reach = axion_reach(&curve, &masses, a.t_m, &params, c, a.quoted_constants)?;

    prepare_out_dir(&a.out)?;
    let curve_path = a.out.join(CURVE_FILE);
    let reach_path = a.out.join(REACH_FILE);
    write_sensitivity(&curve_path, &curve)?;
    write_axion_reach(&reach_path, &reach)?;
    let mut m = RunManifest::new("sensitivity", args);
    m.inputs = inputs;
    m.outputs = vec![curve_path.clone(), reach_path.clone()];
    finish(m, &a.out, started)?;

    let (lo, hi) = curve.range();
    let best = reach
        .iter()
        .map(|r| r.g_ann_limit)
        .fold(f64::INFINITY, f64::min);
    Ok(Report::new(json!({
        "sensitivity": curve_path,
        "axion_reach": reach_path,
        "noise_floor_v_per_rthz": curve.noise_floor,
        "source": curve.source,
        "kappa": a.kappa,
        "freq_lo_hz": lo,
        "delta_b_lo_t_per_rthz": curve.points[0].1,
        "freq_hi_hz": hi,
        "delta_b_hi_t_per_rthz": curve.points[curve.points.len() - 1].1,
        "quoted_constants": a.quoted_constants,
        "best_g_ann_limit_per_gev": best,
    })))
}
