//! Experiment configuration, validation and the two derived frequencies
//! (Larmor frequency and drive modulation index).
//!
//! Everything is stored in SI units. The sign of `b0` encodes the bias
//! direction (+z or -z).

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Which integrator drives the Bloch equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    /// Classical fixed-step fourth-order Runge-Kutta with step `rk4_step`.
    Rk4,
    /// Dormand-Prince 5(4) with error-per-unit-step control.
    Dopri5,
}

/// All physical and numerical parameters of one simulated run.
///
/// The JSON form is a flat object with exactly these keys; unknown keys are
/// rejected and missing keys take the [`Default`] value. Infinite relaxation
/// times are written as the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Bias field, T. Signed.
    pub b0: f64,
    /// Drive amplitude along z, T.
    pub b_ac: f64,
    /// Drive frequency, Hz.
    pub nu_ac: f64,
    /// Feedback gain, T per unit P_x. Zero disables feedback.
    pub chi: f64,
    /// Longitudinal relaxation time, s.
    #[serde(with = "inf_f64")]
    pub t1: f64,
    /// Intrinsic transverse decoherence time, s.
    #[serde(with = "inf_f64")]
    pub t2: f64,
    /// Spin-exchange pumping rate, 1/s.
    pub gamma_se: f64,
    /// Alkali polarization (signed).
    pub p_rb: f64,
    /// Initial polarization magnitude.
    pub p0: f64,
    /// Initial tip angle about x, rad.
    pub theta0: f64,
    /// Transverse seed added to the initial P_x.
    pub seed_transverse: f64,
    /// White-noise density on the detected channel, V/sqrt(Hz).
    pub noise_rms: f64,
    /// Detector output per unit P_x, V.
    pub detector_gain: f64,
    /// Feed the noisy detector output (not the bare P_x) into the feedback coil.
    pub noise_in_loop: bool,
    /// s
    pub duration: f64,
    /// Hz
    pub sample_rate: f64,
    pub rng_seed: u64,
    pub integrator: IntegratorKind,
    /// Local error per unit step, relative to the polarization scale.
    pub tolerance: f64,
    /// Fixed step for RK4, s.
    pub rk4_step: f64,
    /// Largest adaptive step, s.
    pub max_step: f64,
    /// Adaptive steps below this abort the run, s.
    pub min_step: f64,
    pub max_steps: usize,
}

/// Initial polarization magnitude. Placeholder, not a measured value.
pub const DEFAULT_P0: f64 = 0.01;
/// Placeholder spin-exchange rate, 1/s.
pub const DEFAULT_GAMMA_SE: f64 = 0.05;
/// Placeholder alkali polarization; its sign selects the pumping direction.
pub const DEFAULT_P_RB: f64 = 0.5;
pub const DEFAULT_T1: f64 = 21.5;
pub const DEFAULT_T2: f64 = 13.65;
pub const DEFAULT_B0: f64 = 750e-9;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            b0: DEFAULT_B0,
            b_ac: 0.0,
            nu_ac: 0.0,
            chi: 0.0,
            t1: DEFAULT_T1,
            t2: DEFAULT_T2,
            gamma_se: DEFAULT_GAMMA_SE,
            p_rb: DEFAULT_P_RB,
            p0: DEFAULT_P0,
            theta0: PI / 15.0,
            seed_transverse: 1e-6 * DEFAULT_P0,
            noise_rms: 0.0,
            detector_gain: 1.0,
            noise_in_loop: false,
            duration: 60.0,
            sample_rate: 200.0,
            rng_seed: 0,
            integrator: IntegratorKind::Dopri5,
            tolerance: 1e-9,
            rk4_step: 1e-3,
            max_step: 0.02,
            min_step: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_owned(),
            msg: e.to_string(),
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Longitudinal fixed point of the relaxation and pumping terms.
    pub fn pumped_equilibrium(&self) -> f64 {
        let rate = self.longitudinal_rate();
        if rate == 0.0 {
            0.0
        } else {
            self.gamma_se * self.p_rb / rate
        }
    }

    /// 1/T1 + gamma_se.
    pub fn longitudinal_rate(&self) -> f64 {
        1.0 / self.t1 + self.gamma_se
    }

    /// Sets `p_rb` so that the pumped equilibrium is `sign * p0`.
    /// Leaves `p_rb` untouched when pumping is disabled.
    pub fn equilibrate_pumping(&mut self, sign: f64) {
        if self.gamma_se > 0.0 {
            self.p_rb = sign.signum() * self.p0 * self.longitudinal_rate() / self.gamma_se;
        }
    }

    /// Direction (+1 or -1) of the initial longitudinal polarization: along
    /// the pumping direction, or +z when unpumped.
    pub fn initial_sign(&self) -> f64 {
        if self.p_rb < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Turns off T1, T2 and pumping.
    pub fn without_dissipation(mut self) -> Self {
        self.t1 = f64::INFINITY;
        self.t2 = f64::INFINITY;
        self.gamma_se = 0.0;
        self
    }

    /// Number of samples on the output grid, including t = 0.
    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize + 1
    }

    pub fn set_numeric(&mut self, key: &str, value: f64) -> Result<()> {
        match key {
            "b0" => self.b0 = value,
            "b_ac" => self.b_ac = value,
            "nu_ac" => self.nu_ac = value,
            "chi" => self.chi = value,
            "t1" => self.t1 = value,
            "t2" => self.t2 = value,
            "gamma_se" => self.gamma_se = value,
            "p_rb" => self.p_rb = value,
            "p0" => self.p0 = value,
            "theta0" => self.theta0 = value,
            "seed_transverse" => self.seed_transverse = value,
            "noise_rms" => self.noise_rms = value,
            "detector_gain" => self.detector_gain = value,
            "duration" => self.duration = value,
            "sample_rate" => self.sample_rate = value,
            "tolerance" => self.tolerance = value,
            "rk4_step" => self.rk4_step = value,
            "max_step" => self.max_step = value,
            "min_step" => self.min_step = value,
            "rng_seed" if value >= 0.0 && value.fract() == 0.0 => self.rng_seed = value as u64,
            "max_steps" if value >= 1.0 && value.fract() == 0.0 => self.max_steps = value as usize,
            _ => return Err(Error::Domain(format!("`{key}` is not a numeric config field"))),
        }
        Ok(())
    }
}

/// One violated bound, naming the field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks every invariant of [`ExperimentConfig`] with the default constants.
pub fn validate_config(cfg: &ExperimentConfig) -> Vec<Violation> {
    validate_config_with(cfg, &PhysicalConstants::default())
}

pub fn validate_config_with(cfg: &ExperimentConfig, c: &PhysicalConstants) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |field: &str, message: String| {
        out.push(Violation {
            field: field.to_owned(),
            message,
        })
    };

    for (name, v) in [
        ("b0", cfg.b0),
        ("b_ac", cfg.b_ac),
        ("nu_ac", cfg.nu_ac),
        ("chi", cfg.chi),
        ("gamma_se", cfg.gamma_se),
        ("p_rb", cfg.p_rb),
        ("seed_transverse", cfg.seed_transverse),
        ("noise_rms", cfg.noise_rms),
        ("detector_gain", cfg.detector_gain),
    ] {
        if !v.is_finite() {
            bad(name, format!("must be finite, got {v}"));
        }
    }

    if !(cfg.t1 > 0.0) {
        bad("t1", format!("must be > 0, got {}", cfg.t1));
    }
    if !(cfg.t2 > 0.0) {
        bad("t2", format!("must be > 0, got {}", cfg.t2));
    }
    if !(cfg.duration > 0.0 && cfg.duration.is_finite()) {
        bad("duration", format!("must be finite and > 0, got {}", cfg.duration));
    }
    let larmor = larmor_frequency(cfg.b0, c);
    if !(cfg.sample_rate > 4.0 * larmor) || !cfg.sample_rate.is_finite() {
        bad(
            "sample_rate",
            format!(
                "must exceed 4 x Larmor frequency = {:.4} Hz, got {}",
                4.0 * larmor,
                cfg.sample_rate
            ),
        );
    }
    if !(0.0..=1.0).contains(&cfg.p0) {
        bad("p0", format!("must lie in [0, 1], got {}", cfg.p0));
    }
    if !(cfg.theta0.abs() <= PI) {
        bad("theta0", format!("|theta0| must be <= pi, got {}", cfg.theta0));
    }
    if cfg.b_ac < 0.0 {
        bad("b_ac", format!("must be >= 0, got {}", cfg.b_ac));
    }
    if cfg.nu_ac < 0.0 {
        bad("nu_ac", format!("must be >= 0, got {}", cfg.nu_ac));
    }
    if cfg.gamma_se < 0.0 {
        bad("gamma_se", format!("must be >= 0, got {}", cfg.gamma_se));
    }
    if cfg.p_rb.abs() > 1.0 {
        bad("p_rb", format!("|p_rb| must be <= 1, got {}", cfg.p_rb));
    }
    if cfg.noise_rms < 0.0 {
        bad("noise_rms", format!("must be >= 0, got {}", cfg.noise_rms));
    }
    if cfg.noise_in_loop && cfg.detector_gain == 0.0 {
        bad("detector_gain", "must be nonzero when noise_in_loop is set".into());
    }
    if !(cfg.tolerance > 0.0) {
        bad("tolerance", format!("must be > 0, got {}", cfg.tolerance));
    }
    if !(cfg.rk4_step > 0.0) {
        bad("rk4_step", format!("must be > 0, got {}", cfg.rk4_step));
    }
    if !(cfg.max_step > 0.0) {
        bad("max_step", format!("must be > 0, got {}", cfg.max_step));
    }
    if !(cfg.min_step > 0.0 && cfg.min_step < cfg.max_step) {
        bad("min_step", format!("must lie in (0, max_step), got {}", cfg.min_step));
    }
    out
}

/// Larmor frequency magnitude |gamma| |b0|, Hz.
pub fn larmor_frequency(b0: f64, c: &PhysicalConstants) -> f64 {
    c.gamma_xe.abs() * b0.abs()
}

/// Drive modulation index |gamma| b_ac / nu_ac.
pub fn modulation_index(b_ac: f64, nu_ac: f64, c: &PhysicalConstants) -> Result<f64> {
    if !(nu_ac > 0.0) {
        return Err(Error::Domain(format!(
            "modulation index undefined for nu_ac = {nu_ac} Hz"
        )));
    }
    Ok(c.gamma_xe.abs() * b_ac / nu_ac)
}

mod inf_f64 {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" | "Infinity" | "infinity" => Ok(f64::INFINITY),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}
