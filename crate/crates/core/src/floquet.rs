//! Floquet picture of the driven spin: quasi-energy ladder, Bessel state
//! amplitudes and the sideband comb they produce.
//!
//! A bias modulated as `B0 + Bac cos(2 pi nu_ac t)` dresses each spin branch
//! into a ladder `E/2pi = eps nu0/2 + n nu_ac`. Transitions between ladders
//! appear at `nu0 + k nu_ac` with amplitude `J_k(m)`, `m = |gamma| Bac / nu_ac`,
//! which is also the Jacobi-Anger expansion of the phase-modulated carrier.

use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_j, bessel_j_table};
use crate::config::modulation_index;
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::spectral::{amplitude_spectrum_padded, Spectrum, Window, PEAK_PAD};

/// Allowed shortfall of `sum J_k^2` from one.
pub const TRUNCATION_TOL: f64 = 1e-9;

/// Extra orders beyond the modulation index needed for a converged comb.
pub const K_MARGIN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Up,
    Down,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Up => 1.0,
            Branch::Down => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloquetLevel {
    pub branch: Branch,
    pub n: i64,
    pub energy_hz: f64,
}

impl FloquetLevel {
    pub fn new(branch: Branch, n: i64, nu0: f64, nu_ac: f64) -> Self {
        Self {
            branch,
            n,
            energy_hz: floquet_energy(branch, n, nu0, nu_ac),
        }
    }
}

/// Quasi-energy `eps nu0/2 + n nu_ac`, Hz.
pub fn floquet_energy(branch: Branch, n: i64, nu0: f64, nu_ac: f64) -> f64 {
    branch.sign() * nu0 / 2.0 + n as f64 * nu_ac
}

/// Frequency of the (+, n) -> (-, m) transition.
pub fn transition_frequency(n: i64, m: i64, nu0: f64, nu_ac: f64) -> f64 {
    floquet_energy(Branch::Up, n, nu0, nu_ac) - floquet_energy(Branch::Down, m, nu0, nu_ac)
}

/// Overlap of the dressed state with photon-number offset `k` on `branch`:
/// `J_k(eps gamma Bac / 2 nu_ac)`.
pub fn floquet_amplitude(
    k: i64,
    branch: Branch,
    b_ac: f64,
    nu_ac: f64,
    c: &PhysicalConstants,
) -> Result<f64> {
    if !(nu_ac > 0.0) {
        return Err(Error::Domain(format!("nu_ac must be positive, got {nu_ac}")));
    }
    let x = branch.sign() * c.gamma_xe * b_ac / (2.0 * nu_ac);
    Ok(bessel_j(k, x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandLine {
    pub k: i64,
    pub freq_hz: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandModel {
    pub lines: Vec<SidebandLine>,
    pub mod_index: f64,
    pub carrier: f64,
    pub nu_ac: f64,
}

impl SidebandModel {
    pub fn line(&self, k: i64) -> Option<&SidebandLine> {
        self.lines.iter().find(|l| l.k == k)
    }

    pub fn power_sum(&self) -> f64 {
        self.lines.iter().map(|l| l.amplitude * l.amplitude).sum()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.lines.iter().fold(0.0, |m, l| m.max(l.amplitude))
    }

    /// Lines strictly above `rel_threshold` times the tallest one.
    pub fn count_above(&self, rel_threshold: f64) -> usize {
        let t = rel_threshold * self.max_amplitude();
        self.lines.iter().filter(|l| l.amplitude > t).count()
    }

    /// JSON array of `{k, freq_hz, amplitude}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.lines).expect("plain numeric records")
    }
}

/// Predicted comb for orders `-k_max ..= k_max` around `nu0`.
pub fn sideband_spectrum(
    nu0: f64,
    nu_ac: f64,
    b_ac: f64,
    k_max: usize,
    c: &PhysicalConstants,
) -> Result<SidebandModel> {
    let m = modulation_index(b_ac, nu_ac, c)?;
    let j = bessel_j_table(k_max, m);
    let mut lines = Vec::with_capacity(2 * k_max + 1);
    for k in -(k_max as i64)..=k_max as i64 {
        lines.push(SidebandLine {
            k,
            freq_hz: transition_frequency(k, 0, nu0, nu_ac),
            amplitude: j[k.unsigned_abs() as usize].abs(),
        });
    }
    let model = SidebandModel {
        lines,
        mod_index: m,
        carrier: nu0,
        nu_ac,
    };
    let deficit = 1.0 - model.power_sum();
    if deficit > TRUNCATION_TOL {
        return Err(Error::Truncation { deficit });
    }
    Ok(model)
}

/// Smallest order range that holds the comb for modulation index `m`.
pub fn default_k_max(m: f64) -> usize {
    m.ceil() as usize + K_MARGIN
}

/// Highest order whose amplitude exceeds 1e-10; beyond it the comb is
/// numerically empty.
pub fn significant_order(m: f64) -> usize {
    let j = bessel_j_table(default_k_max(m), m);
    j.iter().rposition(|v| v.abs() > 1e-10).unwrap_or(0)
}

/// Brute-force check of the comb: synthesizes `cos(2 pi nu0 t + m sin(2 pi nu_ac t))`
/// and returns its Hann-windowed, zero-padded amplitude spectrum.
pub fn fm_oracle(
    nu0: f64,
    nu_ac: f64,
    b_ac: f64,
    duration: f64,
    sample_rate: f64,
    c: &PhysicalConstants,
) -> Result<Spectrum> {
    let m = modulation_index(b_ac, nu_ac, c)?;
    let reach = significant_order(m) as f64 * nu_ac;
    let highest = nu0 + reach;
    if !(sample_rate > 4.0 * highest) {
        return Err(Error::Aliasing {
            sample_rate,
            highest,
        });
    }
    if nu0 - reach <= 0.0 {
        return Err(Error::Domain(format!(
            "comb extends {reach} Hz below a {nu0} Hz carrier and folds at zero"
        )));
    }
    if duration * nu_ac < 8.0 {
        return Err(Error::InsufficientData(format!(
            "{duration} s does not resolve {nu_ac} Hz line spacing"
        )));
    }
    let n = (duration * sample_rate).round() as usize;
    let w0 = 2.0 * std::f64::consts::PI * nu0;
    let wac = 2.0 * std::f64::consts::PI * nu_ac;
    let s = TimeSeries::from_fn(0.0, 1.0 / sample_rate, n, "", |t| {
        (w0 * t + m * (wac * t).sin()).cos()
    });
    amplitude_spectrum_padded(&s, Window::Hann, PEAK_PAD)
}

/// Reads the height of every model line from a measured spectrum, searching
/// a quarter line spacing either side of the predicted frequency.
pub fn measure_lines(spec: &Spectrum, model: &SidebandModel) -> Vec<SidebandLine> {
    model
        .lines
        .iter()
        .filter_map(|l| {
            let p = spec.peak_near(l.freq_hz, 0.25 * model.nu_ac)?;
            Some(SidebandLine {
                k: l.k,
                freq_hz: p.freq,
                amplitude: p.amplitude,
            })
        })
        .collect()
}
