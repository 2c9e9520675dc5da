//! Lab-frame integration of the nonlinear Bloch equations with feedback.
//!
//! With angular frequency vector `w = 2 pi gamma B`,
//!
//! ```text
//! dPx/dt = Py wz - Pz wy - Px / T2
//! dPy/dt = Pz wx - Px wz - Py / T2
//! dPz/dt = Px wy - Py wx - Pz / T1 + gamma_se (P_Rb - Pz)
//! ```
//!
//! where `B = (B0 + B_ac cos(2 pi nu_ac t)) z + chi Px y`. No rotating-wave
//! approximation is made.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{validate_config_with, ExperimentConfig, IntegratorKind};
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};
use crate::integrator::{AdaptiveOptions, Method, OdeSystem, Solver, Stats};
use crate::series::TimeSeries;
use crate::state::PolarizationState;

/// Transverse feedback field B_f = chi * P_x, T.
pub fn feedback_field(px: f64, chi: f64) -> f64 {
    chi * px
}

/// Rotates `state` by `theta0` about +x (right-handed): (0, 0, 1) tipped by
/// pi/2 becomes (0, -1, 0).
pub fn apply_tip(state: PolarizationState, theta0: f64) -> PolarizationState {
    let (s, c) = theta0.sin_cos();
    PolarizationState::new(
        state.px,
        state.py * c - state.pz * s,
        state.py * s + state.pz * c,
    )
}

/// Initial state of a run: `p0` along the pumping direction, tipped by
/// `theta0` about x, plus the transverse seed on P_x.
pub fn initial_state(cfg: &ExperimentConfig) -> PolarizationState {
    let tipped = apply_tip(
        PolarizationState::new(0.0, 0.0, cfg.initial_sign() * cfg.p0),
        cfg.theta0,
    );
    PolarizationState::new(tipped.px + cfg.seed_transverse, tipped.py, tipped.pz)
}

fn inv(t: f64) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        1.0 / t
    }
}

/// The right-hand side of the Bloch equations for one configuration.
#[derive(Debug, Clone, Copy)]
pub struct BlochSystem {
    two_pi_gamma: f64,
    b0: f64,
    b_ac: f64,
    omega_ac: f64,
    chi: f64,
    r1: f64,
    r2: f64,
    gamma_se: f64,
    p_rb: f64,
    /// Extra polarization-equivalent signal added to P_x inside the loop.
    loop_offset: f64,
}

impl BlochSystem {
    pub fn new(cfg: &ExperimentConfig, c: &PhysicalConstants) -> Self {
        Self {
            two_pi_gamma: 2.0 * PI * c.gamma_xe,
            b0: cfg.b0,
            b_ac: cfg.b_ac,
            omega_ac: 2.0 * PI * cfg.nu_ac,
            chi: cfg.chi,
            r1: inv(cfg.t1),
            r2: inv(cfg.t2),
            gamma_se: cfg.gamma_se,
            p_rb: cfg.p_rb,
            loop_offset: 0.0,
        }
    }

    #[inline]
    pub fn eval(&self, t: f64, p: &[f64; 3]) -> [f64; 3] {
        let [px, py, pz] = *p;
        let bz = self.b0 + self.b_ac * (self.omega_ac * t).cos();
        let wz = self.two_pi_gamma * bz;
        let wy = self.two_pi_gamma * feedback_field(px + self.loop_offset, self.chi);
        [
            py * wz - pz * wy - self.r2 * px,
            -px * wz - self.r2 * py,
            px * wy - self.r1 * pz + self.gamma_se * (self.p_rb - pz),
        ]
    }
}

impl OdeSystem<3> for BlochSystem {
    fn rhs(&self, t: f64, y: &[f64; 3]) -> [f64; 3] {
        self.eval(t, y)
    }
}

/// Time derivative of the polarization.
pub fn derivative(
    state: PolarizationState,
    t: f64,
    cfg: &ExperimentConfig,
    c: &PhysicalConstants,
) -> Result<PolarizationState> {
    if !state.is_finite() || !t.is_finite() {
        return Err(Error::NonFinite { t });
    }
    let d = BlochSystem::new(cfg, c).eval(t, &state.to_array());
    Ok(PolarizationState::from_array(d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMeta {
    pub config: ExperimentConfig,
    pub constants: PhysicalConstants,
    pub stats: Stats,
}

/// Output of [`integrate`]: states and detector trace on one uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<PolarizationState>,
    /// detector_gain * P_x + noise, V.
    pub detected: TimeSeries,
    pub meta: SimMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Px,
    Py,
    Pz,
    Transverse,
}

impl SimResult {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn component(&self, which: Component) -> TimeSeries {
        let values = self
            .states
            .iter()
            .map(|s| match which {
                Component::Px => s.px,
                Component::Py => s.py,
                Component::Pz => s.pz,
                Component::Transverse => s.transverse(),
            })
            .collect();
        TimeSeries::new(self.t0, self.dt, values, "")
    }

    pub fn final_state(&self) -> PolarizationState {
        *self.states.last().expect("non-empty result")
    }
}

/// Integrates the configured run with the default constants.
pub fn integrate(cfg: &ExperimentConfig) -> Result<SimResult> {
    integrate_with(cfg, &PhysicalConstants::default())
}

pub fn integrate_with(cfg: &ExperimentConfig, c: &PhysicalConstants) -> Result<SimResult> {
    let violations = validate_config_with(cfg, c);
    if !violations.is_empty() {
        return Err(Error::InvalidConfig(violations));
    }

    let n = cfg.sample_count();
    let dt = 1.0 / cfg.sample_rate;
    let noise = white_noise(cfg, n);

    let y0 = initial_state(cfg);
    let mut sys = BlochSystem::new(cfg, c);
    if cfg.noise_in_loop {
        sys.loop_offset = noise[0] / cfg.detector_gain;
    }
    let method = match cfg.integrator {
        IntegratorKind::Rk4 => Method::Rk4 { step: cfg.rk4_step },
        IntegratorKind::Dopri5 => Method::Dopri5(AdaptiveOptions {
            tolerance: cfg.tolerance,
            scale: y0.norm().max(cfg.p0).max(f64::MIN_POSITIVE),
            max_step: cfg.max_step,
            min_step: cfg.min_step,
        }),
    };
    let mut solver = Solver::new(&sys, method, 0.0, y0.to_array(), cfg.max_steps)?;

    let mut states = Vec::with_capacity(n);
    states.push(y0);
    let t_end = (n - 1) as f64 * dt;

    if cfg.noise_in_loop {
        // The loop signal is held constant over each sample interval, so
        // steps must not straddle sample boundaries.
        for i in 1..n {
            sys.loop_offset = noise[i - 1] / cfg.detector_gain;
            solver.refresh(&sys);
            solver.advance(&sys, i as f64 * dt, |_| {})?;
            states.push(PolarizationState::from_array(solver.state()));
        }
    } else {
        let mut next = 1usize;
        solver.advance(&sys, t_end, |seg| {
            let t1 = seg.t1() + 1e-9 * dt;
            while next < n && next as f64 * dt <= t1 {
                states.push(PolarizationState::from_array(seg.eval(next as f64 * dt)));
                next += 1;
            }
        })?;
        if states.len() < n {
            states.push(PolarizationState::from_array(solver.state()));
        }
    }
    debug_assert_eq!(states.len(), n);

    let detected: Vec<f64> = states
        .iter()
        .zip(&noise)
        .map(|(s, e)| cfg.detector_gain * s.px + e)
        .collect();

    Ok(SimResult {
        t0: 0.0,
        dt,
        states,
        detected: TimeSeries::new(0.0, dt, detected, "V"),
        meta: SimMeta {
            config: cfg.clone(),
            constants: *c,
            stats: solver.stats(),
        },
    })
}

/// White noise of one-sided density `noise_rms` (V/sqrt(Hz)) sampled at
/// `sample_rate`: per-sample standard deviation is `noise_rms * sqrt(fs / 2)`.
pub fn white_noise(cfg: &ExperimentConfig, n: usize) -> Vec<f64> {
    if cfg.noise_rms == 0.0 {
        return vec![0.0; n];
    }
    let sigma = cfg.noise_rms * (cfg.sample_rate / 2.0).sqrt();
    let dist = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}
