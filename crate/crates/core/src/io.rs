//! File formats: CSV records with JSON sidecars.
//!
//! Floating-point values are written in Rust's shortest round-trip form, so
//! reading a file back reproduces every value bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bloch::SimResult;
use crate::error::{Error, Result};
use crate::metrology::{AxionReachRow, SensitivityCurve};
use crate::series::TimeSeries;
use crate::spectral::{Peak, Spectrum};

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt_f64))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Path with `.json` in place of the extension.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// `t,px,py,pz,detected_v` plus a sidecar with config, constants and stats.
pub fn write_sim_result(path: &Path, r: &SimResult) -> Result<()> {
    write_rows(
        path,
        &["t", "px", "py", "pz", "detected_v"],
        r.states
            .iter()
            .zip(&r.detected.values)
            .enumerate()
            .map(|(i, (s, d))| vec![r.time(i), s.px, s.py, s.pz, *d]),
    )?;
    write_json(&sidecar_path(path), &r.meta)
}

/// Columns of a numeric CSV keyed by header name.
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let perr = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        msg,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers: Vec<String> = r
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(perr("missing header".into()));
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for (col, field) in columns.iter_mut().zip(rec.iter()) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| perr(format!("row {}: '{field}' is not a number", line + 2)))?;
            col.push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(perr("no data rows".into()));
    }
    Ok(Table { headers, columns })
}

/// Reads column `value` against column `t` as a uniformly sampled series.
/// With `value = None`, `detected_v` is used if present, else the second column.
pub fn read_time_series(path: &Path, value: Option<&str>) -> Result<TimeSeries> {
    let table = read_table(path)?;
    let perr = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        msg,
    };
    let t = table
        .column("t")
        .ok_or_else(|| perr("no 't' column".into()))?;
    let name = match value {
        Some(v) => v.to_string(),
        None if table.column("detected_v").is_some() => "detected_v".into(),
        None => table
            .headers
            .iter()
            .find(|h| h.as_str() != "t")
            .cloned()
            .ok_or_else(|| perr("no value column".into()))?,
    };
    let y = table
        .column(&name)
        .ok_or_else(|| perr(format!("no '{name}' column")))?;
    let unit = if name == "detected_v" { "V" } else { "" };
    TimeSeries::from_samples(t, y.to_vec(), unit)
}

#[derive(Serialize)]
struct SpectrumMeta<'a> {
    kind: crate::spectral::SpectrumKind,
    window: crate::spectral::Window,
    resolution_hz: f64,
    record_s: f64,
    averages: usize,
    bins: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<&'a str>,
}

/// `freq_hz,value` plus a sidecar with kind, window and resolution.
pub fn write_spectrum(path: &Path, s: &Spectrum, source: Option<&str>) -> Result<()> {
    write_rows(
        path,
        &["freq_hz", "value"],
        s.freqs.iter().zip(&s.values).map(|(f, v)| vec![*f, *v]),
    )?;
    write_json(
        &sidecar_path(path),
        &SpectrumMeta {
            kind: s.kind,
            window: s.window,
            resolution_hz: s.resolution_hz,
            record_s: s.record_s,
            averages: s.averages,
            bins: s.len(),
            source,
        },
    )
}

pub fn write_peaks(path: &Path, peaks: &[Peak]) -> Result<()> {
    write_json(path, &peaks)
}

/// `freq_hz,delta_b_tesla_per_rthz`.
pub fn write_sensitivity(path: &Path, c: &SensitivityCurve) -> Result<()> {
    write_rows(
        path,
        &["freq_hz", "delta_b_tesla_per_rthz"],
        c.points.iter().map(|(f, b)| vec![*f, *b]),
    )
}

/// `mass_ev,freq_hz,g_ann_limit`.
pub fn write_axion_reach(path: &Path, rows: &[AxionReachRow]) -> Result<()> {
    write_rows(
        path,
        &["mass_ev", "freq_hz", "g_ann_limit"],
        rows.iter().map(|r| vec![r.mass_ev, r.freq_hz, r.g_ann_limit]),
    )
}

/// Generic numeric table with the given header.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_rows(path, header, rows.iter().cloned())
}
