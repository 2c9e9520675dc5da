//! Magnetometer calibration chain: response model, noise floor, field
//! sensitivity, and conversion to axion-nucleon coupling reach.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::constants::{PhysicalConstants, MU_0};
use crate::error::{Error, Result};
use crate::spectral::{Spectrum, SpectrumKind};

/// Sideband response constant quoted with the measured sensitivity, V Hz/nT.
pub const KAPPA_QUOTED: f64 = 5.5e-3;
/// Response constant implied by the 1/nu calibration fit a = 0.017 V Hz at
/// B_ac = 2.25 nT, V Hz/nT.
pub const KAPPA_FROM_FREQ_SWEEP: f64 = 0.017 / 2.25;
/// Measured white-noise floor of the detection chain, V/sqrt(Hz).
pub const NOISE_FLOOR_MEASURED: f64 = 4e-5;
/// Field per unit coupling for the nucleon gradient interaction, T GeV.
pub const C_B_DEFAULT: f64 = 6e-8;
/// Quoted coupling sensitivity slope, GeV^-1 Hz^-1/2 per Hz.
pub const QUOTED_COUPLING_SLOPE: f64 = 2.7e-5;
/// Fewest bins `noise_floor` will take a median over.
pub const MIN_FLOOR_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    /// V Hz / nT.
    pub kappa: f64,
    /// Drive frequencies over which the model was calibrated, Hz.
    pub valid_range: (f64, f64),
    /// Largest modulation index for which the response is linear.
    pub max_index: f64,
}

impl Default for ResponseModel {
    fn default() -> Self {
        Self {
            kappa: KAPPA_QUOTED,
            valid_range: (1e-3, 22.0),
            max_index: 0.5,
        }
    }
}

impl ResponseModel {
    pub fn with_kappa(kappa: f64) -> Self {
        Self {
            kappa,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitSystem {
    /// Magnetization in A/m, field in tesla.
    Si,
    /// Magnetization in emu/cm^3, field in gauss.
    Gaussian,
}

/// Field seen by the alkali magnetometer from polarized nuclei with
/// contact-enhancement factor `kappa0`: `(8 pi/3) kappa0 M` in Gaussian
/// units, `(2/3) kappa0 mu0 M` in SI.
pub fn effective_detection_field(m_x: f64, kappa0: f64, units: UnitSystem) -> Result<f64> {
    if !(kappa0 > 0.0) {
        return Err(Error::Domain(format!("kappa0 must be positive, got {kappa0}")));
    }
    Ok(match units {
        UnitSystem::Si => 2.0 / 3.0 * kappa0 * MU_0 * m_x,
        UnitSystem::Gaussian => 8.0 * std::f64::consts::PI / 3.0 * kappa0 * m_x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Response {
    /// First-sideband amplitude, V.
    pub volts: f64,
    pub mod_index: f64,
    /// The drive exceeds the model's small-index bound.
    pub nonlinear: bool,
}

/// Sideband amplitude `kappa b_ac / nu_ac` for a drive of `b_ac` nT.
pub fn predicted_response(
    b_ac_nt: f64,
    nu_ac: f64,
    model: &ResponseModel,
    c: &PhysicalConstants,
) -> Result<Response> {
    if !(nu_ac > 0.0) {
        return Err(Error::Domain(format!("nu_ac must be positive, got {nu_ac}")));
    }
    let mod_index = c.gamma_xe.abs() * b_ac_nt * 1e-9 / nu_ac;
    Ok(Response {
        volts: model.kappa * b_ac_nt / nu_ac,
        mod_index,
        nonlinear: mod_index > model.max_index,
    })
}

/// White-noise amplitude density from the median of a PSD.
///
/// Bins inside any `exclusion` interval and the DC bin are ignored. Each PSD
/// bin of a K-segment average is distributed as `S chi^2_{2K} / 2K`, whose
/// median is below its mean (by ln 2 for a single periodogram), so the median
/// is divided by that factor before taking the square root.
pub fn noise_floor(spec: &Spectrum, exclusion: &[(f64, f64)]) -> Result<f64> {
    if spec.kind != SpectrumKind::Psd {
        return Err(Error::Domain("noise floor needs a power spectral density".into()));
    }
    let mut vals: Vec<f64> = spec
        .freqs
        .iter()
        .zip(&spec.values)
        .skip(1)
        .filter(|(f, _)| !exclusion.iter().any(|(lo, hi)| **f >= *lo && **f <= *hi))
        .map(|(_, v)| *v)
        .collect();
    if vals.len() < MIN_FLOOR_BINS {
        return Err(Error::InsufficientData(format!(
            "{} unmasked bins, need {MIN_FLOOR_BINS}",
            vals.len()
        )));
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    let median = if n % 2 == 1 {
        vals[n / 2]
    } else {
        0.5 * (vals[n / 2 - 1] + vals[n / 2])
    };
    let k = spec.averages.max(1) as f64;
    let bias = Gamma::new(k, k).expect("positive shape").inverse_cdf(0.5);
    Ok((median / bias).sqrt())
}

/// Field sensitivity `noise nu_ac / kappa`, T/sqrt(Hz).
pub fn field_sensitivity(noise: f64, model: &ResponseModel, nu_ac: f64) -> Result<f64> {
    if !(nu_ac > 0.0) {
        return Err(Error::Domain(format!("nu_ac must be positive, got {nu_ac}")));
    }
    Ok(noise * nu_ac / model.kappa * 1e-9)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveSource {
    Measured,
    Modeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    /// (frequency Hz, delta B T/sqrt(Hz)), increasing in frequency.
    pub points: Vec<(f64, f64)>,
    pub noise_floor: f64,
    pub source: CurveSource,
}

impl SensitivityCurve {
    pub fn modeled(noise: f64, model: &ResponseModel, grid: &[f64]) -> Result<Self> {
        Self::build(noise, model, grid, CurveSource::Modeled)
    }

    /// Curve from a noise floor measured on a recorded spectrum.
    pub fn measured(noise: f64, model: &ResponseModel, grid: &[f64]) -> Result<Self> {
        Self::build(noise, model, grid, CurveSource::Measured)
    }

    fn build(noise: f64, model: &ResponseModel, grid: &[f64], source: CurveSource) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::InsufficientData("empty frequency grid".into()));
        }
        let mut g = grid.to_vec();
        g.sort_by(f64::total_cmp);
        g.dedup();
        let points = g
            .iter()
            .map(|&nu| field_sensitivity(noise, model, nu).map(|b| (nu, b)))
            .collect::<Result<_>>()?;
        Ok(Self {
            points,
            noise_floor: noise,
            source,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Linear interpolation inside the grid.
    pub fn at(&self, nu: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(nu >= lo && nu <= hi) {
            return Err(Error::Domain(format!("{nu} Hz outside curve range [{lo}, {hi}] Hz")));
        }
        let i = self.points.partition_point(|p| p.0 < nu);
        if self.points[i].0 == nu || i == 0 {
            return Ok(self.points[i].1);
        }
        let (a, b) = (self.points[i - 1], self.points[i]);
        Ok(a.1 + (nu - a.0) / (b.0 - a.0) * (b.1 - a.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxionParams {
    pub mass_ev: f64,
    pub g_ann: f64,
    /// T GeV.
    pub c_b: f64,
    pub g_n: f64,
}

impl Default for AxionParams {
    fn default() -> Self {
        Self {
            mass_ev: 1e-15,
            g_ann: 0.0,
            c_b: C_B_DEFAULT,
            g_n: crate::constants::G_N_XE,
        }
    }
}

/// Compton frequency `m c^2 / h`, Hz.
pub fn axion_frequency(mass_ev: f64, c: &PhysicalConstants) -> Result<f64> {
    if !(mass_ev > 0.0) {
        return Err(Error::Domain(format!("axion mass must be positive, got {mass_ev}")));
    }
    Ok(c.ev_to_hz(mass_ev))
}

/// Pseudo-magnetic field `|c_B g_ann / g_n|`, T.
pub fn axion_effective_field(g_ann: f64, params: &AxionParams) -> Result<f64> {
    if params.g_n == 0.0 {
        return Err(Error::Domain("g_n must be nonzero".into()));
    }
    Ok((params.c_b * g_ann / params.g_n).abs())
}

/// Coupling per sqrt(Hz) matching the field sensitivity at `nu`.
pub fn coupling_sensitivity(curve: &SensitivityCurve, nu: f64, params: &AxionParams) -> Result<f64> {
    if params.c_b == 0.0 {
        return Err(Error::Domain("c_B must be nonzero".into()));
    }
    Ok(curve.at(nu)? * params.g_n.abs() / params.c_b)
}

/// The quoted `2.7e-5 nu` GeV^-1/sqrt(Hz) law.
pub fn quoted_coupling_sensitivity(nu: f64) -> f64 {
    QUOTED_COUPLING_SLOPE * nu
}

/// Limit after integrating for `t_m` seconds: `s / sqrt(t_m)`.
pub fn coupling_limit(sensitivity: f64, t_m: f64) -> Result<f64> {
    if !(t_m > 0.0) {
        return Err(Error::Domain(format!("measurement time must be positive, got {t_m}")));
    }
    Ok(sensitivity / t_m.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxionReachRow {
    pub mass_ev: f64,
    pub freq_hz: f64,
    pub g_ann_limit: f64,
}

/// Coupling limit at the Compton frequency of each mass. With
/// `quoted_constants` the quoted slope replaces the explicit chain.
pub fn axion_reach(
    curve: &SensitivityCurve,
    masses_ev: &[f64],
    t_m: f64,
    params: &AxionParams,
    c: &PhysicalConstants,
    quoted_constants: bool,
) -> Result<Vec<AxionReachRow>> {
    masses_ev
        .iter()
        .map(|&m| {
            let nu = axion_frequency(m, c)?;
            let s = if quoted_constants {
                quoted_coupling_sensitivity(nu)
            } else {
                coupling_sensitivity(curve, nu, params)?
            };
            Ok(AxionReachRow {
                mass_ev: m,
                freq_hz: nu,
                g_ann_limit: coupling_limit(s, t_m)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::NUCLEAR_MAGNETON;
    use crate::series::TimeSeries;
    use crate::spectral::{psd, PsdMethod, Window};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn c() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn white(d: f64, fs: f64, n: usize, seed: u64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, d * (fs / 2.0f64).sqrt()).unwrap();
        TimeSeries::new(0.0, 1.0 / fs, (0..n).map(|_| nd.sample(&mut rng)).collect(), "V")
    }

    #[test]
    fn detection_field() {
        assert_eq!(effective_detection_field(0.0, 500.0, UnitSystem::Si).unwrap(), 0.0);
        let a = effective_detection_field(1e-6, 500.0, UnitSystem::Si).unwrap();
        let b = effective_detection_field(1e-6, 1000.0, UnitSystem::Si).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-30);
        assert!(effective_detection_field(1.0, 0.0, UnitSystem::Si).is_err());
        // 1 A/m = 1e-3 emu/cm^3 and 1 G = 1e-4 T
        let g = effective_detection_field(1e-9, 500.0, UnitSystem::Gaussian).unwrap();
        assert!((g * 1e-4 / a - 1.0).abs() < 1e-9);
        // 129Xe, n = 1.1687e23 m^-3, 1% polarization, mu = 0.778 nuclear magnetons
        let m = 1.1687e23 * 0.778 * NUCLEAR_MAGNETON * 0.01;
        let reg = effective_detection_field(m, 500.0, UnitSystem::Si).unwrap();
        assert!((reg / 1.923_667_575_478e-9 - 1.0).abs() < 1e-9, "{reg}");
    }

    #[test]
    fn response_examples() {
        let m = ResponseModel::default();
        let r = predicted_response(2.25, 1.0, &m, &c()).unwrap();
        assert!((r.volts - 0.012_375).abs() < 1e-15);
        assert!(!r.nonlinear);
        let h = predicted_response(2.25, 2.0, &m, &c()).unwrap();
        assert!((h.volts - r.volts / 2.0).abs() < 1e-16);
        assert_eq!(predicted_response(0.0, 3.0, &m, &c()).unwrap().volts, 0.0);
        assert!(predicted_response(56.15, 0.9, &m, &c()).unwrap().nonlinear);
    }

    #[test]
    fn floor_of_white_noise() {
        let s = white(4e-5, 200.0, 200_000, 7);
        for method in [
            PsdMethod::Periodogram(Window::Rectangular),
            PsdMethod::welch_with_segments(s.len(), 32),
        ] {
            let p = psd(&s, method).unwrap();
            let f = noise_floor(&p, &[]).unwrap();
            assert!((f / 4e-5 - 1.0).abs() < 0.1, "{method:?}: {f}");
        }
    }

    #[test]
    fn floor_masks_carrier() {
        // on-bin tone: no leakage with a rectangular window
        let s = TimeSeries::from_fn(0.0, 0.01, 10_000, "V", |t| (2.0 * std::f64::consts::PI * 9.0 * t).cos());
        let p = psd(&s, PsdMethod::Periodogram(Window::Rectangular)).unwrap();
        assert!(noise_floor(&p, &[(8.5, 9.5)]).unwrap() < 1e-12);

        let noise = white(4e-5, 100.0, 10_000, 3);
        let mixed = TimeSeries::new(
            0.0,
            0.01,
            s.values.iter().zip(&noise.values).map(|(a, b)| a + b).collect(),
            "V",
        );
        let p = psd(&mixed, PsdMethod::Periodogram(Window::Rectangular)).unwrap();
        assert!(noise_floor(&p, &[]).unwrap() > noise_floor(&p, &[(8.5, 9.5)]).unwrap());
    }

    #[test]
    fn floor_needs_bins_and_psd() {
        let s = white(1.0, 10.0, 32, 1);
        let p = psd(&s, PsdMethod::Periodogram(Window::Rectangular)).unwrap();
        assert!(matches!(noise_floor(&p, &[]), Err(Error::InsufficientData(_))));
        let a = crate::spectral::amplitude_spectrum(&white(1.0, 10.0, 400, 1), Window::Hann).unwrap();
        assert!(noise_floor(&a, &[]).is_err());
    }

    #[test]
    fn sensitivity_examples() {
        let m = ResponseModel::default();
        let low = field_sensitivity(4e-5, &m, 1e-3).unwrap();
        assert!((low / 7.2727e-15 - 1.0).abs() < 1e-4);
        let high = field_sensitivity(4e-5, &m, 1.0).unwrap();
        assert!((high / low - 1000.0).abs() < 1e-9);
        assert_eq!(field_sensitivity(0.0, &m, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn axion_examples() {
        assert!((axion_frequency(1e-15, &c()).unwrap() / 0.2418 - 1.0).abs() < 1e-3);
        assert!((axion_frequency(1e-18, &c()).unwrap() / 0.2418e-3 - 1.0).abs() < 1e-3);
        assert!(axion_frequency(0.0, &c()).is_err());
        let p = AxionParams::default();
        assert_eq!(axion_effective_field(0.0, &p).unwrap(), 0.0);
        assert!((axion_effective_field(1.0, &p).unwrap() - 4e-8).abs() < 1e-22);
        let zero = AxionParams { g_n: 0.0, ..p };
        assert!(axion_effective_field(1.0, &zero).is_err());
    }

    #[test]
    fn coupling_chain() {
        let model = ResponseModel::default();
        let grid: Vec<f64> = (0..=30).map(|i| 1e-3 * 10f64.powf(i as f64 / 10.0)).collect();
        let curve = SensitivityCurve::modeled(4e-5, &model, &grid).unwrap();
        let p = AxionParams::default();
        let s = coupling_sensitivity(&curve, 1e-3, &p).unwrap();
        // explicit chain: 7.27e-15 T * 1.5 / 6e-8 T GeV
        assert!((s / 1.818e-7 - 1.0).abs() < 1e-3, "{s}");
        let ratio = s / quoted_coupling_sensitivity(1e-3);
        assert!((ratio - 6.734).abs() < 0.01, "{ratio}");
        assert!(coupling_sensitivity(&curve, 5.0, &p).is_err());
        let limit = coupling_limit(quoted_coupling_sensitivity(1e-3), 1e4).unwrap();
        assert!((limit / 2.7e-10 - 1.0).abs() < 1e-12);
        assert!((coupling_limit(1.0, 4e4).unwrap() - 0.5 * coupling_limit(1.0, 1e4).unwrap()).abs() < 1e-18);
        assert_eq!(coupling_limit(0.3, 1.0).unwrap(), 0.3);
        assert!(coupling_limit(1.0, 0.0).is_err());
    }

    #[test]
    fn reach_rows() {
        let model = ResponseModel::default();
        let curve = SensitivityCurve::modeled(4e-5, &model, &[1e-4, 1.0]).unwrap();
        let rows = axion_reach(&curve, &[1e-18, 1e-16], 1e4, &AxionParams::default(), &c(), true).unwrap();
        assert_eq!(rows.len(), 2);
        assert!((rows[0].g_ann_limit - 2.7e-5 * rows[0].freq_hz / 100.0).abs() < 1e-20);
        assert!(SensitivityCurve::modeled(4e-5, &model, &[]).is_err());
    }

    #[test]
    fn measured_chain_matches_model() {
        // white detector noise through psd -> floor -> sensitivity
        let s = white(4e-5, 50.0, 100_000, 21);
        let p = psd(&s, PsdMethod::welch_with_segments(s.len(), 32)).unwrap();
        let floor = noise_floor(&p, &[]).unwrap();
        let model = ResponseModel::default();
        for nu in [1e-3, 1e-2, 0.1, 1.0, 10.0] {
            let got = field_sensitivity(floor, &model, nu).unwrap();
            let want = 4e-5 * nu / model.kappa * 1e-9;
            assert!((got / want - 1.0).abs() < 0.1);
        }
    }

    proptest! {
        #[test]
        fn field_coupling_inverse(db in 1e-18f64..1e-9, gn in -3.0f64..-0.1, cb in 1e-9f64..1e-6) {
            let p = AxionParams { g_n: gn, c_b: cb, ..AxionParams::default() };
            let curve = SensitivityCurve { points: vec![(1.0, db), (2.0, db)], noise_floor: 0.0, source: CurveSource::Modeled };
            let g = coupling_sensitivity(&curve, 1.5, &p).unwrap();
            prop_assert!((axion_effective_field(g, &p).unwrap() / db - 1.0).abs() < 1e-12);
        }

        #[test]
        fn sensitivity_proportional(noise in 1e-7f64..1e-3, nu in 1e-4f64..100.0, k in 1.0f64..10.0) {
            let m = ResponseModel::default();
            let a = field_sensitivity(noise, &m, nu).unwrap();
            let b = field_sensitivity(noise, &m, k * nu).unwrap();
            prop_assert!((b / a - k).abs() < 1e-12 * k);
        }

        #[test]
        fn axion_frequency_linear(m in 1e-20f64..1e-12) {
            let f1 = axion_frequency(m, &c()).unwrap();
            let f2 = axion_frequency(2.0 * m, &c()).unwrap();
            prop_assert!((f2 - 2.0 * f1).abs() <= 1e-15 * f2);
        }
    }
}
