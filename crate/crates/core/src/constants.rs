//! Physical constants used throughout the crate. All values are SI.

use serde::{Deserialize, Serialize};

/// Exact SI Planck constant, J s.
pub const PLANCK_H: f64 = 6.626_070_15e-34;
/// Exact speed of light, m/s.
pub const LIGHT_C: f64 = 299_792_458.0;
/// Exact elementary charge, J/eV.
pub const EV_TO_JOULE: f64 = 1.602_176_634e-19;
/// Vacuum permeability (CODATA 2018), T m / A.
pub const MU_0: f64 = 1.256_637_062_12e-6;
/// Nuclear magneton (CODATA 2018), J/T.
pub const NUCLEAR_MAGNETON: f64 = 5.050_783_746_1e-27;

/// Gyromagnetic ratio of 129Xe in Hz/T (negative: moment antiparallel to spin).
pub const GAMMA_XE: f64 = -1.18e7;
/// Nuclear Landé factor of 129Xe.
pub const G_N_XE: f64 = -1.5;

/// Constants that enter the model. Kept as a value so alternative
/// species or conventions can be swapped in without touching call sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Hz/T
    pub gamma_xe: f64,
    /// J s
    pub planck_h: f64,
    /// m/s
    pub light_c: f64,
    /// J/eV
    pub ev_to_joule: f64,
    pub g_n: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            gamma_xe: GAMMA_XE,
            planck_h: PLANCK_H,
            light_c: LIGHT_C,
            ev_to_joule: EV_TO_JOULE,
            g_n: G_N_XE,
        }
    }
}

impl PhysicalConstants {
    pub fn is_valid(&self) -> bool {
        self.gamma_xe < 0.0
            && self.g_n < 0.0
            && self.planck_h > 0.0
            && self.light_c > 0.0
            && self.ev_to_joule > 0.0
    }

    pub fn ev_to_hz(&self, ev: f64) -> f64 {
        ev * self.ev_to_joule / self.planck_h
    }

    pub fn hz_to_ev(&self, hz: f64) -> f64 {
        hz * self.planck_h / self.ev_to_joule
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_satisfy_sign_invariants() {
        let c = PhysicalConstants::default();
        assert!(c.is_valid());
        assert!(!PhysicalConstants { gamma_xe: 1.0, ..c }.is_valid());
        assert!(!PhysicalConstants { g_n: 1.5, ..c }.is_valid());
    }

    proptest! {
        #[test]
        fn ev_hz_round_trip(ev in 1e-24f64..1e-6) {
            let c = PhysicalConstants::default();
            let back = c.hz_to_ev(c.ev_to_hz(ev));
            prop_assert!(((back - ev) / ev).abs() < 1e-12);
        }
    }
}
