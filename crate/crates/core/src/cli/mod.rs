//! The `fms` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.

mod manifest;
mod scan;
mod sensitivity;
mod simulate;
mod spectrum;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

pub use manifest::{RunManifest, MANIFEST_FILE};
pub use scan::{parse_values, ScanFit};

use crate::analytic::gain_from_damping_time;
use crate::config::{modulation_index, validate_config, ExperimentConfig};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::floquet::{default_k_max, sideband_spectrum};
use crate::presets::Preset;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "fms", version, about = "Floquet spin maser simulator and analysis tools")]
pub struct Cli {
    /// Output style for the summary printed on stdout.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the Bloch equations and write the trace.
    Simulate(simulate::SimulateArgs),
    /// Spectrum and peak list of a recorded or simulated trace.
    Spectrum(spectrum::SpectrumArgs),
    /// Sweep one parameter, one run per value, and aggregate the results.
    Scan(scan::ScanArgs),
    /// Field-sensitivity curve and axion coupling reach.
    Sensitivity(sensitivity::SensitivityArgs),
    /// Predicted Floquet sideband comb for a drive.
    Sidebands(SidebandArgs),
    /// List the named configurations, or print one as JSON.
    Preset(PresetArgs),
}

/// Where a run's configuration comes from.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Configuration file (JSON).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Named configuration (see `fms preset`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Override a numeric field, e.g. `--set duration=120`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Set the feedback gain from a damping time, s.
    #[arg(long)]
    pub td: Option<f64>,
}

impl ConfigArgs {
    /// The configuration with overrides applied and validated.
    pub fn resolve(&self, c: &PhysicalConstants) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path).map_err(|e| match e {
                Error::Io(io) => Error::Domain(format!("{}: {io}", path.display())),
                e => e,
            })?,
            (None, Some(name)) => name.parse::<Preset>()?.config(c),
            (None, None) => return Err(Error::Domain("one of --config or --preset is required".into())),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Domain(format!("`{kv}` is not KEY=VALUE")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("`{v}` is not a number")))?;
            cfg.set_numeric(k.trim(), v)?;
        }
        if let Some(td) = self.td {
            cfg.chi = gain_from_damping_time(td, cfg.p0, c)?;
        }
        let violations = validate_config(&cfg);
        if !violations.is_empty() {
            return Err(Error::InvalidConfig(violations));
        }
        Ok(cfg)
    }

    fn record(&self, m: &mut RunManifest) {
        m.config_path = self.config.clone();
        m.preset = self.preset.clone();
    }
}

#[derive(Debug, Args)]
pub struct SidebandArgs {
    /// Drive amplitude, T.
    #[arg(long)]
    pub b_ac: f64,
    /// Drive frequency, Hz.
    #[arg(long)]
    pub nu_ac: f64,
    /// Carrier frequency, Hz.
    #[arg(long, default_value_t = 8.85)]
    pub carrier: f64,
    /// Count lines above this fraction of the tallest.
    #[arg(long, default_value_t = 0.01)]
    pub threshold: f64,
    /// Write the line list here (CSV `k,freq_hz,amplitude`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    pub name: Option<String>,
}

/// Summary printed on stdout: a JSON value, and the same content as rows.
pub struct Report {
    pub json: Value,
    pub rows: Vec<(String, String)>,
}

impl Report {
    pub fn new(json: Value) -> Self {
        let rows = match &json {
            Value::Object(map) => map
                .iter()
                .filter(|(_, v)| !v.is_array() && !v.is_object())
                .map(|(k, v)| (k.clone(), v.to_string().trim_matches('"').to_string()))
                .collect(),
            _ => Vec::new(),
        };
        Self { json, rows }
    }

    /// Renders the report; a closed stdout is not an error.
    fn print(&self, format: Format) {
        let mut out = std::io::stdout().lock();
        let _ = match format {
            Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&self.json).expect("report serializes")),
            Format::Table => {
                let w = self.rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                self.rows.iter().try_for_each(|(k, v)| match (k.is_empty(), v.is_empty()) {
                    (true, _) => writeln!(out, "{v}"),
                    (_, true) => writeln!(out, "{k}"),
                    _ => writeln!(out, "{k:<w$}  {v}"),
                })
            }
        };
    }
}

/// Exit status for a failed command.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite { .. }
        | Error::StepUnderflow { .. }
        | Error::TooManySteps { .. }
        | Error::Truncation { .. }
        | Error::HalfMaxNotBracketed { .. }
        | Error::FitInit(_) => EXIT_NUMERIC,
        _ => EXIT_USAGE,
    }
}

pub(crate) fn prepare_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub(crate) fn finish(mut m: RunManifest, dir: &Path, started: Instant) -> Result<()> {
    m.wall_time_s = started.elapsed().as_secs_f64();
    m.write(dir)
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let rest: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(&cli.command, &rest) {
        Ok(report) => {
            report.print(cli.format);
            ExitCode::from(EXIT_OK)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cmd: &Command, args: &[String]) -> Result<Report> {
    let c = PhysicalConstants::default();
    match cmd {
        Command::Simulate(a) => simulate::run(a, args, &c),
        Command::Spectrum(a) => spectrum::run(a, args),
        Command::Scan(a) => scan::run(a, args, &c),
        Command::Sensitivity(a) => sensitivity::run(a, args, &c),
        Command::Sidebands(a) => sidebands(a, &c),
        Command::Preset(a) => preset(a, &c),
    }
}

fn sidebands(a: &SidebandArgs, c: &PhysicalConstants) -> Result<Report> {
    let m = modulation_index(a.b_ac, a.nu_ac, c)?;
    let model = sideband_spectrum(a.carrier, a.nu_ac, a.b_ac, default_k_max(m), c)?;
    if let Some(path) = &a.out {
        let rows: Vec<Vec<f64>> = model
            .lines
            .iter()
            .map(|l| vec![l.k as f64, l.freq_hz, l.amplitude])
            .collect();
        crate::io::write_table(path, &["k", "freq_hz", "amplitude"], &rows)?;
    }
    Ok(Report::new(json!({
        "mod_index": m,
        "lines_above_threshold": model.count_above(a.threshold),
        "threshold": a.threshold,
        "power_sum": model.power_sum(),
        "k_max": model.lines.iter().map(|l| l.k).max().unwrap_or(0),
    })))
}

fn preset(a: &PresetArgs, c: &PhysicalConstants) -> Result<Report> {
    match &a.name {
        Some(name) => {
            let cfg = name.parse::<Preset>()?.config(c);
            Ok(Report {
                json: serde_json::to_value(&cfg)?,
                rows: vec![(String::new(), cfg.to_json_pretty())],
            })
        }
        None => {
            let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
            Ok(Report {
                json: json!(names),
                rows: names.iter().map(|n| (n.to_string(), String::new())).collect(),
            })
        }
    }
}
