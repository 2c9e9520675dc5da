use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{finish, prepare_out_dir, ConfigArgs, Report, RunManifest};
use crate::analysis::{summarize, RunSummary};
use crate::analytic::gain_from_damping_time;
use crate::bloch::integrate_with;
use crate::config::{larmor_frequency, validate_config, ExperimentConfig};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::fit::{fit_inverse_freq, fit_linear, FitResult};
use crate::io::{fmt_f64, sidecar_path, write_json, write_sim_result};

pub const AGGREGATE_FILE: &str = "scan.csv";
pub const FIT_FILE: &str = "scan_fit.json";
/// Pseudo-parameter: damping time, s, mapped onto the feedback gain.
pub const TD_PARAM: &str = "td";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanFit {
    /// fitted_rate = a / value + b (scan of td: a = 1, b = 1/T2).
    DampingLaw,
    /// sideband_amplitude = a / value (scan of nu_ac).
    InverseFreq,
    /// sideband_amplitude = a value + b (scan of b_ac).
    Linear,
    /// maser_freq - nu0 = a / value + b (scan of td).
    Pulling,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Numeric config field to sweep, or `td` for the damping time.
    #[arg(long)]
    pub param: String,
    /// `start:stop:count`, evenly spaced.
    #[arg(long, conflicts_with = "values", allow_hyphen_values = true)]
    pub range: Option<String>,
    /// Geometric instead of even spacing for --range.
    #[arg(long, requires = "range")]
    pub log: bool,
    /// Explicit comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    pub values: Option<String>,
    /// Fit applied to the aggregate.
    #[arg(long, value_enum)]
    pub fit: Option<ScanFit>,
    /// Parallel runs; FMS_JOBS takes precedence. Defaults to the processor count.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Skip writing per-run traces.
    #[arg(long)]
    pub no_traces: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// One row of the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub index: usize,
    pub value: f64,
    pub rng_seed: u64,
    pub summary: RunSummary,
}

fn bad(msg: String) -> Error {
    Error::Domain(msg)
}

/// Parses `--range` / `--values` into the list of scan values.
pub fn parse_values(range: Option<&str>, values: Option<&str>, log: bool) -> Result<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("`{s}` is not a number")))
    };
    let out = match (range, values) {
        (Some(r), None) => {
            let parts: Vec<&str> = r.split(':').collect();
            let [a, b, n] = parts[..] else {
                return Err(bad(format!("range `{r}` is not start:stop:count")));
            };
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| bad(format!("`{n}` is not a count")))?;
            if log && !(a > 0.0 && b > 0.0) {
                return Err(bad("geometric range needs positive bounds".into()));
            }
            (0..n)
                .map(|i| {
                    let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                    if log {
                        a * (b / a).powf(f)
                    } else {
                        a + (b - a) * f
                    }
                })
                .collect()
        }
        (None, Some(v)) => v
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(bad("exactly one of --range or --values is required".into())),
    };
    if out.is_empty() {
        return Err(Error::InsufficientData("scan has no values".into()));
    }
    Ok(out)
}

fn apply(base: &ExperimentConfig, param: &str, value: f64, index: usize, c: &PhysicalConstants) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    if param == TD_PARAM {
        cfg.chi = gain_from_damping_time(value, cfg.p0, c)?;
    } else {
        cfg.set_numeric(param, value)?;
    }
    cfg.rng_seed = base.rng_seed ^ index as u64;
    let v = validate_config(&cfg);
    if !v.is_empty() {
        return Err(Error::InvalidConfig(v));
    }
    Ok(cfg)
}

/// `--jobs`, unless FMS_JOBS is set.
pub fn job_count(flag: Option<usize>) -> Result<usize> {
    let env = std::env::var("FMS_JOBS").ok();
    let n = match env {
        Some(s) => s
            .trim()
            .parse::<usize>()
            .map_err(|_| bad(format!("FMS_JOBS=`{s}` is not a count")))?,
        None => flag.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
    };
    if n == 0 {
        return Err(bad("job count must be at least 1".into()));
    }
    Ok(n)
}

pub fn trace_name(index: usize) -> String {
    format!("run_{index:03}.csv")
}

fn write_aggregate(path: &Path, rows: &[ScanRow]) -> Result<()> {
    let err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    let mut header = vec!["index", "value", "rng_seed"];
    header.extend(RunSummary::HEADERS);
    w.write_record(&header).map_err(err)?;
    for r in rows {
        let mut rec = vec![r.index.to_string(), fmt_f64(r.value), r.rng_seed.to_string()];
        rec.extend(r.summary.values().map(fmt_f64));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

/// Fit of the aggregate, skipping rows where the fitted figure is NaN.
pub fn fit_aggregate(kind: ScanFit, rows: &[ScanRow], nu0: f64) -> Result<FitResult> {
    let pts = |f: &dyn Fn(&ScanRow) -> (f64, f64)| -> Vec<(f64, f64)> {
        rows.iter().map(f).filter(|(x, y)| x.is_finite() && y.is_finite()).collect()
    };
    match kind {
        ScanFit::DampingLaw => fit_linear(&pts(&|r| (1.0 / r.value, r.summary.fitted_rate))),
        ScanFit::InverseFreq => fit_inverse_freq(&pts(&|r| (r.value, r.summary.sideband_amplitude))),
        ScanFit::Linear => fit_linear(&pts(&|r| (r.value, r.summary.sideband_amplitude))),
        ScanFit::Pulling => fit_linear(&pts(&|r| (1.0 / r.value, r.summary.maser_freq - nu0))),
    }
}

pub fn run(a: &ScanArgs, args: &[String], c: &PhysicalConstants) -> Result<Report> {
    let started = Instant::now();
    let base = a.config.resolve(c)?;
    let values = parse_values(a.range.as_deref(), a.values.as_deref(), a.log)?;
    let configs = values
        .iter()
        .enumerate()
        .map(|(i, &v)| apply(&base, &a.param, v, i, c))
        .collect::<Result<Vec<_>>>()?;
    let jobs = job_count(a.jobs)?;
    prepare_out_dir(&a.out)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| bad(e.to_string()))?;
    let results: Vec<Result<ScanRow>> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, cfg)| {
                let r = integrate_with(cfg, c)?;
                if !a.no_traces {
                    write_sim_result(&a.out.join(trace_name(i)), &r)?;
                }
                Ok(ScanRow {
                    index: i,
                    value: values[i],
                    rng_seed: cfg.rng_seed,
                    summary: summarize(cfg, c, &r.detected),
                })
            })
            .collect()
    });
    let rows = results.into_iter().collect::<Result<Vec<_>>>()?;

    let agg = a.out.join(AGGREGATE_FILE);
    write_aggregate(&agg, &rows)?;
    let mut m = RunManifest::new("scan", args);
    a.config.record(&mut m);
    m.rng_seed = Some(base.rng_seed);
    m.outputs.push(agg.clone());
    if !a.no_traces {
        for i in 0..rows.len() {
            let p = a.out.join(trace_name(i));
            m.outputs.push(sidecar_path(&p));
            m.outputs.push(p);
        }
    }

    let mut report = json!({
        "aggregate": agg,
        "param": a.param,
        "runs": rows.len(),
        "jobs": jobs,
    });
    if let Some(kind) = a.fit {
        let nu0 = larmor_frequency(base.b0, c);
        let fit = fit_aggregate(kind, &rows, nu0)?;
        let path = a.out.join(FIT_FILE);
        write_json(&path, &json!({ "model": kind, "fit": fit }))?;
        m.outputs.push(path);
        report["fit_model"] = json!(kind);
        for (name, v) in fit.names.iter().zip(&fit.params) {
            report[format!("fit_{name}")] = json!(v);
        }
        report["fit_r_squared"] = json!(fit.r_squared);
    }
    finish(m, &a.out, started)?;
    Ok(Report::new(report))
}
