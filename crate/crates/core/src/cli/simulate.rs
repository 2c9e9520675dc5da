use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde_json::json;

use super::{finish, prepare_out_dir, ConfigArgs, Report, RunManifest};
use crate::analysis::summarize;
use crate::bloch::integrate_with;
use crate::constants::PhysicalConstants;
use crate::error::Result;
use crate::io::{sidecar_path, write_sim_result};

pub const TRACE_FILE: &str = "trace.csv";

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(a: &SimulateArgs, args: &[String], c: &PhysicalConstants) -> Result<Report> {
    let started = Instant::now();
    let cfg = a.config.resolve(c)?;
    let r = integrate_with(&cfg, c)?;
    prepare_out_dir(&a.out)?;
    let trace = a.out.join(TRACE_FILE);
    write_sim_result(&trace, &r)?;

    let mut m = RunManifest::new("simulate", args);
    a.config.record(&mut m);
    m.outputs = vec![trace.clone(), sidecar_path(&trace)];
    m.rng_seed = Some(cfg.rng_seed);
    finish(m, &a.out, started)?;

    let s = summarize(&cfg, c, &r.detected);
    let last = r.final_state();
    Ok(Report::new(json!({
        "trace": trace,
        "samples": r.len(),
        "steps": r.meta.stats.steps,
        "rejected_steps": r.meta.stats.rejected,
        "final_px": last.px,
        "final_py": last.py,
        "final_pz": last.pz,
        "fitted_rate": s.fitted_rate,
        "maser_freq": s.maser_freq,
        "carrier_amplitude": s.carrier_amplitude,
        "sideband_amplitude": s.sideband_amplitude,
    })))
}
