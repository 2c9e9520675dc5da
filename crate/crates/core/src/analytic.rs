//! Closed-form behaviour of the undriven feedback system: the transient
//! sech envelope, the damping law, frequency pulling and the maser threshold.
//!
//! Feedback gain and damping time are related by linearizing the Bloch
//! equations about a longitudinal polarization `p0`. Only the co-rotating
//! half of the linearly polarized feedback field acts secularly, which gives
//! `1/T_d = pi |gamma chi p0|`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::{Error, Result};

/// Default frequency-pulling coefficient (dimensionless, Hz s).
pub const DEFAULT_ALPHA_PULLING: f64 = 0.235;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientParams {
    pub theta0: f64,
    pub t2: f64,
    pub td: f64,
    pub p0: f64,
    pub alpha_pulling: f64,
}

impl TransientParams {
    pub fn new(theta0: f64, t2: f64, td: f64, p0: f64) -> Self {
        Self {
            theta0,
            t2,
            td,
            p0,
            alpha_pulling: DEFAULT_ALPHA_PULLING,
        }
    }
}

fn ratio(t2: f64, td: f64) -> f64 {
    if td.is_infinite() {
        0.0
    } else {
        t2 / td
    }
}

/// Transverse decay time with feedback, (1/T2 + 1/Td)^-1.
pub fn effective_t2(t2: f64, td: f64) -> f64 {
    if td.is_infinite() {
        return t2;
    }
    1.0 / (1.0 / t2 + 1.0 / td)
}

/// q = [1 + (T2/Td)^2 + 2 cos(theta0) T2/Td]^(1/2).
pub fn q_factor(theta0: f64, t2: f64, td: f64) -> f64 {
    let r = ratio(t2, td);
    (1.0 + r * r + 2.0 * theta0.cos() * r).max(0.0).sqrt()
}

/// Time of maximum transverse polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PeakTime {
    /// The envelope rises and peaks at this positive time (transient maser).
    Burst(f64),
    /// t0 <= 0: the envelope only decays for t >= 0. Holds `-inf` when the
    /// inverse-tanh argument reaches 1.
    MonotoneDecay(f64),
    /// Exactly inverted with no transverse component: the peak never comes.
    Never,
}

impl PeakTime {
    pub fn t0(&self) -> f64 {
        match *self {
            PeakTime::Burst(t) | PeakTime::MonotoneDecay(t) => t,
            PeakTime::Never => f64::INFINITY,
        }
    }

    pub fn is_monotone_decay(&self) -> bool {
        matches!(self, PeakTime::MonotoneDecay(_))
    }
}

/// t0 = -(T2/q) atanh[(T2/Td cos(theta0) + 1) / q].
pub fn peak_time(theta0: f64, t2: f64, td: f64) -> Result<PeakTime> {
    let q = q_factor(theta0, t2, td);
    if !(q > 0.0) {
        return Err(Error::Domain("q factor vanishes; envelope is undefined".into()));
    }
    let arg = (ratio(t2, td) * theta0.cos() + 1.0) / q;
    if arg >= 1.0 {
        return Ok(PeakTime::MonotoneDecay(f64::NEG_INFINITY));
    }
    if arg <= -1.0 {
        return Ok(PeakTime::Never);
    }
    let t0 = -(t2 / q) * arg.atanh();
    Ok(if t0 > 0.0 {
        PeakTime::Burst(t0)
    } else {
        PeakTime::MonotoneDecay(t0)
    })
}

/// (|P_+|, P_z) at time `t` for a tip of `theta0` from equilibrium `p0`
/// under feedback damping, longitudinal relaxation neglected.
pub fn transient_envelope(t: f64, p: &TransientParams) -> Result<(f64, f64)> {
    let q = q_factor(p.theta0, p.t2, p.td);
    if !(q > 0.0) {
        return Err(Error::Domain("q factor vanishes; envelope is undefined".into()));
    }
    let t0 = peak_time(p.theta0, p.t2, p.td)?.t0();
    if !t0.is_finite() {
        // no transverse component: nothing evolves but T2 is irrelevant to P_z
        return Ok((0.0, p.p0 * p.theta0.cos()));
    }
    // Td/T2 * q; written this way so Td = inf reduces to the pure T2 decay.
    let scale = if p.td.is_infinite() {
        1.0
    } else {
        p.td / p.t2
    };
    let x = q / p.t2 * (t - t0);
    let sech = 1.0 / x.cosh();
    let p_plus = p.p0 * scale * q * sech;
    let p_z = if p.td.is_infinite() {
        // limit Td -> inf: q -> 1 + r cos, P_z stays at p0 cos(theta0)
        p.p0 * p.theta0.cos()
    } else {
        p.p0 * scale * (q * x.tanh() - 1.0)
    };
    Ok((p_plus, p_z))
}

/// Frequency pulling alpha / Td, Hz.
pub fn frequency_pulling(td: f64, alpha: f64) -> f64 {
    if td.is_infinite() {
        0.0
    } else {
        alpha / td
    }
}

/// Threshold for stationary masing: Td / T2 < 1.
pub fn is_masing(td: f64, t2: f64) -> bool {
    td / t2 < 1.0
}

/// Damping time 1/(pi |gamma chi p0|). `chi = 0` gives infinity.
pub fn damping_time_from_gain(chi: f64, p0: f64, c: &PhysicalConstants) -> Result<f64> {
    if chi == 0.0 {
        return Ok(f64::INFINITY);
    }
    if p0 == 0.0 {
        return Err(Error::Domain("damping time undefined at zero polarization".into()));
    }
    Ok(1.0 / (PI * (c.gamma_xe * chi * p0).abs()))
}

/// Gain producing damping time `td` at polarization `p0` along +z. The sign
/// is such that +z polarization is damped and -z polarization amplified.
pub fn gain_from_damping_time(td: f64, p0: f64, c: &PhysicalConstants) -> Result<f64> {
    if td.is_infinite() {
        return Ok(0.0);
    }
    if !(td > 0.0) || p0 <= 0.0 {
        return Err(Error::Domain(format!(
            "need td > 0 and p0 > 0, got td = {td}, p0 = {p0}"
        )));
    }
    Ok(1.0 / (PI * c.gamma_xe * p0 * td))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T2: f64 = 13.65;

    #[test]
    fn effective_t2_examples() {
        assert_eq!(effective_t2(T2, f64::INFINITY), T2);
        assert!((effective_t2(T2, 1.08) - 1.000_814_664).abs() < 1e-9);
        assert!((effective_t2(3.0, 3.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn q_examples() {
        assert!(q_factor(PI, 5.0, 5.0).abs() < 1e-7);
        assert!((q_factor(0.0, T2, 2.0) - (1.0 + T2 / 2.0)).abs() < 1e-12);
        assert!((q_factor(PI / 2.0, 3.0, 3.0) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn small_tilt_is_monotone_decay() {
        for td in [1.0, 1.08, 4.0, 16.0] {
            let pt = peak_time(PI / 15.0, T2, td).unwrap();
            assert!(pt.is_monotone_decay(), "{td}: {pt:?}");
            assert!(pt.t0() < 0.0);
        }
        assert_eq!(
            peak_time(0.0, T2, 2.0).unwrap(),
            PeakTime::MonotoneDecay(f64::NEG_INFINITY)
        );
    }

    #[test]
    fn inversion_below_threshold_bursts() {
        let theta = PI * (1.0 - 1e-4);
        for td in [0.94, 3.18, 6.0] {
            assert!(matches!(peak_time(theta, T2, td).unwrap(), PeakTime::Burst(t) if t > 0.0));
        }
        // above threshold an inverted state just relaxes
        assert!(peak_time(theta, T2, 20.0).unwrap().is_monotone_decay());
    }

    #[test]
    fn exact_inversion_never_peaks() {
        assert_eq!(peak_time(PI, T2, 0.94).unwrap(), PeakTime::Never);
    }

    #[test]
    fn peak_time_is_envelope_argmax() {
        // golden-section search on |P+|(t) as an independent oracle
        let p = TransientParams::new(PI - 1e-3, T2, 0.94, 1.0);
        let t0 = peak_time(p.theta0, p.t2, p.td).unwrap().t0();
        let f = |t: f64| -transient_envelope(t, &p).unwrap().0;
        let (mut a, mut b) = (0.0, 60.0);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let argmax = 0.5 * (a + b);
        assert!((argmax - t0).abs() < 1e-6, "{argmax} vs {t0}");
        // and the derivative vanishes there
        let h = 1e-5;
        let slope = (f(t0 + h) - f(t0 - h)) / (2.0 * h);
        assert!(slope.abs() < 1e-8);
        let peak = transient_envelope(t0, &p).unwrap().0;
        let q = q_factor(p.theta0, p.t2, p.td);
        assert!((peak - p.p0 * p.td * q / p.t2).abs() < 1e-14);
    }

    #[test]
    fn envelope_starts_at_initial_condition() {
        for theta in [PI / 15.0, PI / 2.0, 2.5] {
            let p = TransientParams::new(theta, T2, 2.0, 0.7);
            let (pp, pz) = transient_envelope(0.0, &p).unwrap();
            assert!((pp - 0.7 * theta.sin()).abs() < 1e-12);
            assert!((pz - 0.7 * theta.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_decays_to_zero() {
        let p = TransientParams::new(PI / 2.0, T2, 2.0, 1.0);
        assert!(transient_envelope(1e4, &p).unwrap().0 < 1e-100);
    }

    #[test]
    fn small_tilt_decays_at_summed_rate() {
        // log-slope of the envelope between one and three effective T2
        for td in [1.0, 4.0, 16.0] {
            let p = TransientParams::new(PI / 15.0, T2, td, 1.0);
            let rate = 1.0 / T2 + 1.0 / td;
            let (t1, t2) = (effective_t2(T2, td), 3.0 * effective_t2(T2, td));
            let a1 = transient_envelope(t1, &p).unwrap().0;
            let a2 = transient_envelope(t2, &p).unwrap().0;
            let measured = (a1 / a2).ln() / (t2 - t1);
            assert!((measured / rate - 1.0).abs() < 0.01, "td {td}: {measured} vs {rate}");
        }
    }

    #[test]
    fn pulling_examples() {
        assert_eq!(frequency_pulling(f64::INFINITY, 0.235), 0.0);
        assert!((frequency_pulling(6.25, 0.235) - 0.0376).abs() < 1e-12);
    }

    #[test]
    fn threshold_examples() {
        assert!(is_masing(6.25, 13.65));
        assert!(!is_masing(13.65, 13.65));
        assert!(!is_masing(20.0, 13.65));
    }

    #[test]
    fn gain_damping_round_trip() {
        let c = PhysicalConstants::default();
        let chi = gain_from_damping_time(1.08, 0.01, &c).unwrap();
        assert!(chi < 0.0);
        assert!((damping_time_from_gain(chi, 0.01, &c).unwrap() - 1.08).abs() < 1e-12);
        let half = damping_time_from_gain(2.0 * chi, 0.01, &c).unwrap();
        assert!((half - 0.54).abs() < 1e-12);
        assert_eq!(damping_time_from_gain(0.0, 0.01, &c).unwrap(), f64::INFINITY);
        assert!(damping_time_from_gain(1e-9, 0.0, &c).is_err());
        assert_eq!(gain_from_damping_time(f64::INFINITY, 0.01, &c).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn sech_tanh_identity(t in 0.0f64..100.0, theta in 0.1f64..3.0, td in 0.5f64..30.0) {
            let p = TransientParams::new(theta, T2, td, 1.0);
            let q = q_factor(theta, T2, td);
            let t0 = peak_time(theta, T2, td).unwrap().t0();
            let (pp, _) = transient_envelope(t, &p).unwrap();
            let a = pp / (p.p0 * td * q / T2);
            let th = (q / T2 * (t - t0)).tanh();
            prop_assert!((a * a + th * th - 1.0).abs() < 1e-12);
        }

        #[test]
        fn effective_t2_properties(a in 0.01f64..100.0, b in 0.01f64..100.0, d in 0.0f64..10.0) {
            prop_assert!((effective_t2(a, b) - effective_t2(b, a)).abs() <= 1e-12 * a.max(b));
            prop_assert!(effective_t2(a, b) <= a.min(b));
            prop_assert!(effective_t2(a + d, b) >= effective_t2(a, b));
            prop_assert!(effective_t2(a, b + d) >= effective_t2(a, b));
        }

        #[test]
        fn inverted_pz_is_monotone(td in 0.3f64..13.0) {
            let p = TransientParams::new(PI - 1e-3, T2, td, 1.0);
            let mut last = f64::NEG_INFINITY;
            for k in 0..400 {
                let (_, pz) = transient_envelope(k as f64 * 0.5, &p).unwrap();
                prop_assert!(pz >= last);
                last = pz;
            }
        }

        #[test]
        fn pulling_slope(td in 0.1f64..100.0, alpha in 0.0f64..1.0) {
            prop_assert!((frequency_pulling(td, alpha) * td - alpha).abs() < 1e-14);
        }
    }
}
