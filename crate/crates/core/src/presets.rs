//! Named configurations for the regimes the simulator is usually run in.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::analytic::gain_from_damping_time;
use crate::config::ExperimentConfig;
use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Damping time of the stationary maser, s.
pub const STATIONARY_TD: f64 = 6.25;
/// Drive used for the driven-maser sideband spectrum.
pub const DRIVEN_NU_AC: f64 = 0.9;
pub const DRIVEN_B_AC: f64 = 56.15e-9;
/// Drive amplitude of the calibration sweeps, T.
pub const SWEEP_B_AC: f64 = 2.25e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Small tip under feedback; the envelope decays at 1/T2 + 1/Td.
    Damping,
    /// Fully inverted start without relaxation or pumping: a single sech burst.
    Transient,
    /// Inverted pumping along -z with Td = 6.25 s: burst, then stationary oscillation.
    Stationary,
    /// The stationary maser driven at 0.9 Hz by 56.15 nT.
    Driven,
    /// Free decay after a pi/2 tip with a weak drive, no feedback.
    FreeDecay,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Damping,
        Preset::Transient,
        Preset::Stationary,
        Preset::Driven,
        Preset::FreeDecay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Damping => "damping",
            Preset::Transient => "transient",
            Preset::Stationary => "stationary",
            Preset::Driven => "driven",
            Preset::FreeDecay => "free-decay",
        }
    }

    pub fn config(self, c: &PhysicalConstants) -> ExperimentConfig {
        match self {
            Preset::Damping => damping_law(4.0, c),
            Preset::Transient => transient_maser(3.18, c),
            Preset::Stationary => stationary_maser(c),
            Preset::Driven => driven_maser(c),
            Preset::FreeDecay => free_decay(SWEEP_B_AC, 5.0),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown preset `{s}`")))
    }
}

fn chi_for(td: f64, p0: f64, c: &PhysicalConstants) -> f64 {
    gain_from_damping_time(td, p0, c).expect("p0 of a preset is non-zero")
}

/// Tip of pi/15 from the pumped equilibrium along +z with feedback set to
/// damping time `td`.
pub fn damping_law(td: f64, c: &PhysicalConstants) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        theta0: PI / 15.0,
        seed_transverse: 0.0,
        duration: 60.0,
        ..Default::default()
    };
    cfg.equilibrate_pumping(1.0);
    cfg.chi = chi_for(td, cfg.p0, c);
    cfg
}

/// Inverted start, T1 and pumping off, so the closed-form burst applies.
pub fn transient_maser(td: f64, c: &PhysicalConstants) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        theta0: PI,
        t1: f64::INFINITY,
        gamma_se: 0.0,
        p_rb: 0.0,
        duration: 120.0,
        ..Default::default()
    };
    cfg.chi = chi_for(td, cfg.p0, c);
    cfg
}

/// Bias along -z, alkali polarization inverted, untipped start with the
/// default transverse seed.
pub fn stationary_maser(c: &PhysicalConstants) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        b0: -crate::config::DEFAULT_B0,
        p_rb: -crate::config::DEFAULT_P_RB,
        theta0: 0.0,
        duration: 400.0,
        ..Default::default()
    };
    cfg.chi = chi_for(STATIONARY_TD, cfg.p0, c);
    cfg
}

pub fn driven_maser(c: &PhysicalConstants) -> ExperimentConfig {
    ExperimentConfig {
        b_ac: DRIVEN_B_AC,
        nu_ac: DRIVEN_NU_AC,
        ..stationary_maser(c)
    }
}

/// Inverted pumping held at -p0 with damping time `ratio * T2`: masing below
/// one, decaying above.
pub fn threshold(ratio: f64, c: &PhysicalConstants) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        theta0: 0.0,
        duration: 400.0,
        ..Default::default()
    };
    cfg.equilibrate_pumping(-1.0);
    cfg.chi = chi_for(ratio * cfg.t2, cfg.p0, c);
    cfg
}

/// Pi/2 tip from the pumped equilibrium, no feedback, drive `b_ac` at `nu_ac`.
pub fn free_decay(b_ac: f64, nu_ac: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        theta0: PI / 2.0,
        seed_transverse: 0.0,
        b_ac,
        nu_ac,
        duration: 60.0,
        ..Default::default()
    };
    cfg.equilibrate_pumping(1.0);
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::damping_time_from_gain;
    use crate::config::validate_config;

    #[test]
    fn presets_validate_and_round_trip_names() {
        let c = PhysicalConstants::default();
        for p in Preset::ALL {
            assert!(validate_config(&p.config(&c)).is_empty(), "{}", p.name());
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("nope".parse::<Preset>().is_err());
    }

    #[test]
    fn feedback_matches_requested_damping_time() {
        let c = PhysicalConstants::default();
        let cfg = threshold(0.46, &c);
        let td = damping_time_from_gain(cfg.chi, cfg.p0, &c).unwrap();
        assert!((td / (0.46 * cfg.t2) - 1.0).abs() < 1e-12);
        assert!((cfg.pumped_equilibrium() + cfg.p0).abs() < 1e-15);
    }
}
