//! Damped Gauss-Newton (Levenberg-Marquardt) least squares for the model
//! functions used in the analysis, plus closed-form linear fits.
//!
//! Initial guesses are deterministic: the exponential rate comes from a
//! log-linear regression of the record above its tail level, and the sech
//! centre from the sample maximum.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the scaled gradient (cosine between the
    /// residual vector and each Jacobian column).
    pub gtol: f64,
    /// Relative step size below which the search stops.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gtol: 1e-8,
            xtol: 1e-15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Row-major parameter covariance, `s^2 (J^T J)^+`.
    pub covariance: Vec<Vec<f64>>,
    pub residual_rms: f64,
    pub r_squared: f64,
    pub converged: bool,
    /// The normal matrix is (numerically) singular: some parameters are not
    /// identified by the data.
    pub degenerate: bool,
    pub iterations: usize,
    /// Scaled gradient at the returned parameters.
    pub gradient_norm: f64,
    pub n_points: usize,
    /// Objective (half sum of squares) after each accepted iteration.
    #[serde(skip)]
    pub cost_history: Vec<f64>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.params[i])
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.std_errors[i])
    }

    /// `{params: {name: value}, std_errors: {name: value}, residual_rms, ...}`.
    pub fn to_json(&self) -> String {
        let params: serde_json::Map<String, serde_json::Value> = self
            .names
            .iter()
            .zip(&self.params)
            .map(|(n, v)| (n.clone(), serde_json::json!(v)))
            .collect();
        let errs: serde_json::Map<String, serde_json::Value> = self
            .names
            .iter()
            .zip(&self.std_errors)
            .map(|(n, v)| (n.clone(), serde_json::json!(v)))
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "params": params,
            "std_errors": errs,
            "covariance": self.covariance,
            "residual_rms": self.residual_rms,
            "r_squared": self.r_squared,
            "converged": self.converged,
            "degenerate": self.degenerate,
            "iterations": self.iterations,
            "n_points": self.n_points,
        }))
        .expect("finite json")
    }
}

/// Residual vector `r(p)` (model minus data) with an optional Jacobian.
pub trait Residuals {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn residuals(&self, p: &[f64], out: &mut [f64]);
    /// Row-major `len x p.len()` Jacobian; `false` asks for finite differences.
    fn jacobian(&self, _p: &[f64], _out: &mut DMatrix<f64>) -> bool {
        false
    }
}

/// Central differences with step `1e-6 max(|p_i|, 1e-6)`.
fn fd_jacobian<R: Residuals + ?Sized>(r: &R, p: &[f64], jac: &mut DMatrix<f64>) {
    let m = r.len();
    let mut hi = vec![0.0; m];
    let mut lo = vec![0.0; m];
    let mut q = p.to_vec();
    for j in 0..p.len() {
        let h = 1e-6 * p[j].abs().max(1e-6);
        q[j] = p[j] + h;
        r.residuals(&q, &mut hi);
        q[j] = p[j] - h;
        r.residuals(&q, &mut lo);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (hi[i] - lo[i]) / (2.0 * h);
        }
    }
}

fn jacobian<R: Residuals + ?Sized>(r: &R, p: &[f64], jac: &mut DMatrix<f64>) {
    if !r.jacobian(p, jac) {
        fd_jacobian(r, p, jac);
    }
}

fn half_ss(v: &[f64]) -> f64 {
    0.5 * v.iter().map(|x| x * x).sum::<f64>()
}

fn scaled_gradient(jac: &DMatrix<f64>, r: &[f64]) -> f64 {
    let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    if rn == 0.0 {
        return 0.0;
    }
    let rv = DVector::from_column_slice(r);
    let g = jac.tr_mul(&rv);
    (0..jac.ncols())
        .map(|j| {
            let cn = jac.column(j).norm();
            if cn == 0.0 {
                0.0
            } else {
                (g[j] / (cn * rn)).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Levenberg-Marquardt with Marquardt diagonal scaling and Nielsen damping
/// updates. Only steps that lower the objective are accepted.
pub fn levenberg_marquardt<R: Residuals + ?Sized>(
    r: &R,
    names: &[&str],
    p0: &[f64],
    y_for_r2: &[f64],
    opts: &LmOptions,
) -> FitResult {
    let m = r.len();
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut res = vec![0.0; m];
    r.residuals(&p, &mut res);
    let mut cost = half_ss(&res);
    let mut jac = DMatrix::zeros(m, n);
    jacobian(r, &p, &mut jac);

    let mut history = vec![cost];
    let mut lambda = -1.0;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut trial = vec![0.0; m];

    while iterations < opts.max_iterations {
        if scaled_gradient(&jac, &res) <= opts.gtol || cost == 0.0 {
            break;
        }
        iterations += 1;
        let jtj = jac.tr_mul(&jac);
        let g = jac.tr_mul(&DVector::from_column_slice(&res));
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-300)).collect();
        if lambda < 0.0 {
            lambda = 1e-3 * diag.iter().cloned().fold(0.0, f64::max);
        }
        let mut a = jtj.clone();
        for i in 0..n {
            a[(i, i)] += lambda * diag[i];
        }
        let step = match a.cholesky() {
            Some(ch) => ch.solve(&(-&g)),
            None => {
                lambda *= nu;
                nu *= 2.0;
                continue;
            }
        };
        let q: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        r.residuals(&q, &mut trial);
        let new_cost = half_ss(&trial);
        // predicted reduction of the local quadratic model
        let mut pred = 0.0;
        for i in 0..n {
            pred += step[i] * (lambda * diag[i] * step[i] - g[i]);
        }
        pred *= 0.5;
        let rho = if pred > 0.0 { (cost - new_cost) / pred } else { -1.0 };
        if new_cost.is_finite() && new_cost < cost {
            let small = step
                .iter()
                .zip(&p)
                .all(|(d, v)| d.abs() <= opts.xtol * (v.abs() + opts.xtol));
            p = q;
            std::mem::swap(&mut res, &mut trial);
            cost = new_cost;
            history.push(cost);
            jacobian(r, &p, &mut jac);
            lambda *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            if small {
                break;
            }
        } else {
            lambda *= nu;
            nu *= 2.0;
            if lambda > 1e300 {
                break;
            }
        }
    }

    let grad = scaled_gradient(&jac, &res);
    summarize(names, p, &res, &jac, y_for_r2, grad, grad <= opts.gtol || cost == 0.0, iterations, history)
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    names: &[&str],
    p: Vec<f64>,
    res: &[f64],
    jac: &DMatrix<f64>,
    y: &[f64],
    gradient_norm: f64,
    converged: bool,
    iterations: usize,
    cost_history: Vec<f64>,
) -> FitResult {
    let m = res.len();
    let n = p.len();
    let ssr: f64 = res.iter().map(|x| x * x).sum();
    let dof = m.saturating_sub(n);
    let s2 = if dof > 0 { ssr / dof as f64 } else { 0.0 };
    let jtj = jac.tr_mul(jac);
    let svd = jtj.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let degenerate = !(smax > 0.0) || smin <= 1e-12 * smax;
    let pinv = svd
        .pseudo_inverse(1e-14 * smax.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(n, n));
    let cov = pinv * s2;
    let covariance: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (cov[(i, j)] + cov[(j, i)])).collect())
        .collect();
    let std_errors = (0..n).map(|i| covariance[i][i].max(0.0).sqrt()).collect();
    let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    FitResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        params: p,
        std_errors,
        covariance,
        residual_rms: (ssr / m.max(1) as f64).sqrt(),
        r_squared: if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN },
        converged,
        degenerate,
        iterations,
        gradient_norm,
        n_points: m,
        cost_history,
    }
}

struct ExpDecay<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl Residuals for ExpDecay<'_> {
    fn len(&self) -> usize {
        self.t.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for ((o, &t), &y) in out.iter_mut().zip(self.t).zip(self.y) {
            *o = p[2] + p[0] * (-p[1] * t).exp() - y;
        }
    }

    fn jacobian(&self, p: &[f64], j: &mut DMatrix<f64>) -> bool {
        for i in 0..self.t.len() {
            let e = (-p[1] * self.t[i]).exp();
            j[(i, 0)] = e;
            j[(i, 1)] = -p[0] * self.t[i] * e;
            j[(i, 2)] = 1.0;
        }
        true
    }
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

fn exp_initial_guess(t: &[f64], y: &[f64]) -> [f64; 3] {
    let n = y.len();
    let tail = (n / 20).max(1);
    let floor = y[n - tail..].iter().sum::<f64>() / tail as f64;
    let head = y[0] - floor;
    let (mut xs, mut ls) = (Vec::new(), Vec::new());
    if head != 0.0 {
        for (ti, yi) in t.iter().zip(y) {
            let v = (yi - floor) / head;
            if v > 0.05 {
                xs.push(*ti);
                ls.push(v.ln());
            }
        }
    }
    let span = (t[n - 1] - t[0]).max(f64::MIN_POSITIVE);
    if xs.len() >= 2 {
        let (slope, icept) = ols(&xs, &ls);
        let rate = if slope < 0.0 { -slope } else { 1.0 / span };
        [head * icept.exp(), rate, floor]
    } else {
        [head * (t[0] / span).exp(), 1.0 / span, floor]
    }
}

/// `y = offset + A exp(-rate t)` over the series' absolute time axis.
pub fn fit_exp_decay(series: &TimeSeries) -> Result<FitResult> {
    fit_exp_decay_with(series, &LmOptions::default())
}

pub fn fit_exp_decay_with(series: &TimeSeries, opts: &LmOptions) -> Result<FitResult> {
    if series.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "exponential fit needs 10 points, got {}",
            series.len()
        )));
    }
    let t: Vec<f64> = series.times().collect();
    let y = &series.values;
    let p0 = exp_initial_guess(&t, y);
    let model = ExpDecay { t: &t, y };
    let mut fit = levenberg_marquardt(&model, &["A", "rate", "offset"], &p0, y, opts);
    // a flat record cannot pin the rate
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let rate = fit.params[1];
    let amp_at_start = fit.params[0] * (-rate * t[0]).exp();
    if amp_at_start.abs() <= 1e-9 * scale || !(rate > 0.0) {
        fit.degenerate = true;
    }
    Ok(fit)
}

struct Sech<'a> {
    t: &'a [f64],
    y: &'a [f64],
}

impl Residuals for Sech<'_> {
    fn len(&self) -> usize {
        self.t.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for ((o, &t), &y) in out.iter_mut().zip(self.t).zip(self.y) {
            *o = p[0] / (p[1] * (t - p[2])).cosh() - y;
        }
    }

    fn jacobian(&self, p: &[f64], j: &mut DMatrix<f64>) -> bool {
        for i in 0..self.t.len() {
            let x = p[1] * (self.t[i] - p[2]);
            let s = 1.0 / x.cosh();
            let th = x.tanh();
            j[(i, 0)] = s;
            j[(i, 1)] = -p[0] * s * th * (self.t[i] - p[2]);
            j[(i, 2)] = p[0] * s * th * p[1];
        }
        true
    }
}

/// `y = amplitude sech(width_rate (t - t0))`.
pub fn fit_sech(series: &TimeSeries) -> Result<FitResult> {
    fit_sech_with(series, &LmOptions::default())
}

pub fn fit_sech_with(series: &TimeSeries, opts: &LmOptions) -> Result<FitResult> {
    let n = series.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!("sech fit needs 10 points, got {n}")));
    }
    let y = &series.values;
    let (imax, amax) = y
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, (i, v)| if v > a.1 { (i, v) } else { a });
    if imax == 0 || imax == n - 1 || !(amax > 0.0) {
        return Err(Error::FitInit("no interior maximum".into()));
    }
    // half width from the first half-maximum crossing on either side
    let half = 0.5 * amax;
    let left = (0..imax).rev().find(|&i| y[i] < half);
    let right = (imax..n).find(|&i| y[i] < half);
    let dist = match (left, right) {
        (Some(l), Some(r)) => 0.5 * (r - l) as f64,
        (Some(l), None) => (imax - l) as f64,
        (None, Some(r)) => (r - imax) as f64,
        (None, None) => 0.5 * n as f64,
    } * series.dt;
    // sech(x) = 1/2 at x = acosh(2)
    let w0 = 2f64.acosh() / dist;
    let t: Vec<f64> = series.times().collect();
    let p0 = [amax, w0, t[imax]];
    let model = Sech { t: &t, y };
    Ok(levenberg_marquardt(&model, &["amplitude", "width_rate", "t0"], &p0, y, opts))
}

/// Fits residuals supplied by the caller, with finite-difference derivatives.
pub fn fit_custom<F>(
    names: &[&str],
    p0: &[f64],
    n_residuals: usize,
    f: F,
    opts: &LmOptions,
) -> FitResult
where
    F: Fn(&[f64], &mut [f64]),
{
    struct Custom<F> {
        m: usize,
        f: F,
    }
    impl<F: Fn(&[f64], &mut [f64])> Residuals for Custom<F> {
        fn len(&self) -> usize {
            self.m
        }
        fn residuals(&self, p: &[f64], out: &mut [f64]) {
            (self.f)(p, out)
        }
    }
    let c = Custom { m: n_residuals, f };
    let mut fit = levenberg_marquardt(&c, names, p0, &[], opts);
    fit.r_squared = f64::NAN;
    fit
}

fn closed_form(
    names: &[&str],
    params: Vec<f64>,
    x: &[f64],
    y: &[f64],
    basis: impl Fn(f64) -> Vec<f64>,
) -> FitResult {
    let n = params.len();
    let mut jac = DMatrix::zeros(x.len(), n);
    let mut res = vec![0.0; x.len()];
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        let b = basis(xi);
        let mut model = 0.0;
        for j in 0..n {
            jac[(i, j)] = b[j];
            model += params[j] * b[j];
        }
        res[i] = model - yi;
    }
    let grad = scaled_gradient(&jac, &res);
    let cost = half_ss(&res);
    summarize(names, params, &res, &jac, y, grad, true, 0, vec![cost])
}

/// Least-squares `a` in `xi = a / nu`.
pub fn fit_inverse_freq(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.is_empty() {
        return Err(Error::InsufficientData("no points".into()));
    }
    if let Some(p) = points.iter().find(|p| !(p.0 > 0.0)) {
        return Err(Error::Domain(format!("frequency must be positive, got {}", p.0)));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    let num: f64 = points.iter().map(|(nu, xi)| xi / nu).sum();
    let den: f64 = points.iter().map(|(nu, _)| 1.0 / (nu * nu)).sum();
    Ok(closed_form(&["a"], vec![num / den], &x, &y, |nu| vec![1.0 / nu]))
}

/// Ordinary least squares `y = a x + b`.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("linear fit needs two points".into()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
    if x.iter().all(|v| *v == x[0]) {
        return Err(Error::Domain("all abscissae coincide".into()));
    }
    let (a, b) = ols(&x, &y);
    Ok(closed_form(&["a", "b"], vec![a, b], &x, &y, |v| vec![v, 1.0]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn noisy(seed: u64, sigma: f64, n: usize, dt: f64, f: impl Fn(f64) -> f64) -> TimeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nd = Normal::new(0.0, sigma).unwrap();
        TimeSeries::from_fn(0.0, dt, n, "", f).map_values(|v| v + nd.sample(&mut rng))
    }

    #[test]
    fn exp_recovers_rate_with_noise() {
        let rate = 1.0 / 1.0008;
        let s = noisy(1, 0.01, 600, 0.01, |t| (-rate * t).exp());
        let f = fit_exp_decay(&s).unwrap();
        assert!(f.converged);
        assert!((f.get("rate").unwrap() / rate - 1.0).abs() < 0.01);
    }

    #[test]
    fn exp_noiseless_exact() {
        let s = TimeSeries::from_fn(0.5, 0.02, 400, "", |t| 0.03 + 2.0 * (-0.7 * t).exp());
        let f = fit_exp_decay(&s).unwrap();
        assert!(f.converged && !f.degenerate);
        for (name, want) in [("A", 2.0), ("rate", 0.7), ("offset", 0.03)] {
            let got = f.get(name).unwrap();
            assert!((got / want - 1.0).abs() < 1e-6, "{name}: {got}");
        }
    }

    #[test]
    fn exp_constant_is_degenerate() {
        let s = TimeSeries::new(0.0, 0.1, vec![0.4; 50], "");
        let f = fit_exp_decay(&s).unwrap();
        assert!(f.degenerate);
        assert!(f.get("rate").unwrap().abs() < 1e-3 || f.get("A").unwrap().abs() < 1e-9);
    }

    #[test]
    fn exp_needs_ten_points() {
        let s = TimeSeries::new(0.0, 0.1, vec![1.0; 9], "");
        assert!(fit_exp_decay(&s).is_err());
    }

    #[test]
    fn sech_noiseless_exact() {
        let s = TimeSeries::from_fn(0.0, 0.01, 3000, "", |t| 0.8 / (1.3 * (t - 11.0)).cosh());
        let f = fit_sech(&s).unwrap();
        assert!(f.converged);
        assert!(f.residual_rms < 1e-8 * 0.8);
        assert!((f.get("amplitude").unwrap() / 0.8 - 1.0).abs() < 1e-6);
        assert!((f.get("width_rate").unwrap() / 1.3 - 1.0).abs() < 1e-6);
        assert!((f.get("t0").unwrap() / 11.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sech_transient_envelope() {
        use crate::analytic::{peak_time, q_factor, transient_envelope, TransientParams};
        let p = TransientParams::new(std::f64::consts::PI * (1.0 - 1e-3), 13.65, 0.94, 1.0);
        let s = TimeSeries::from_fn(0.0, 0.01, 4000, "", |t| transient_envelope(t, &p).unwrap().0);
        let f = fit_sech(&s).unwrap();
        let q = q_factor(p.theta0, p.t2, p.td);
        let t0 = peak_time(p.theta0, p.t2, p.td).unwrap().t0();
        assert!((f.get("width_rate").unwrap() / (q / p.t2) - 1.0).abs() < 1e-6);
        assert!((f.get("t0").unwrap() / t0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn sech_monotone_fails_init() {
        let s = TimeSeries::from_fn(0.0, 0.1, 100, "", |t| (-t).exp());
        assert!(matches!(fit_sech(&s), Err(Error::FitInit(_))));
    }

    #[test]
    fn inverse_freq_examples() {
        let f = fit_inverse_freq(&[(1.0, 0.017)]).unwrap();
        assert_eq!(f.get("a").unwrap(), 0.017);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let nd = Normal::new(0.0, 1e-5).unwrap();
        let pts: Vec<(f64, f64)> = (1..=22)
            .map(|k| (k as f64, 0.017 / k as f64 + nd.sample(&mut rng)))
            .collect();
        let f = fit_inverse_freq(&pts).unwrap();
        assert!((f.get("a").unwrap() / 0.017 - 1.0).abs() < 0.005);
        assert!(fit_inverse_freq(&[(0.0, 1.0)]).is_err());
    }

    #[test]
    fn linear_examples() {
        let f = fit_linear(&[(1.0, 2.0), (3.0, 8.0)]).unwrap();
        assert!((f.get("a").unwrap() - 3.0).abs() < 1e-15);
        assert!((f.get("b").unwrap() + 1.0).abs() < 1e-15);
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let b = 0.5 * i as f64;
                (b, 0.0055 * b + 0.0096)
            })
            .collect();
        let f = fit_linear(&pts).unwrap();
        assert!((f.get("a").unwrap() / 0.0055 - 1.0).abs() < 1e-3);
        assert!((f.get("b").unwrap() / 0.0096 - 1.0).abs() < 1e-3);
        assert!(f.r_squared > 0.999_999);
        assert!(fit_linear(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn custom_hook_fits_a_line() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let f = fit_custom(
            &["a", "b"],
            &[0.0, 0.0],
            x.len(),
            |p, out| {
                for (o, xi) in out.iter_mut().zip(&x) {
                    *o = p[0] * xi + p[1] - (2.0 * xi - 0.5);
                }
            },
            &LmOptions::default(),
        );
        assert!(f.converged);
        assert!((f.params[0] - 2.0).abs() < 1e-8 && (f.params[1] + 0.5).abs() < 1e-8);
    }

    #[test]
    fn fd_matches_analytic_jacobian() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y = vec![0.0; 50];
        let m = Sech { t: &t, y: &y };
        let p = [0.7, 1.1, 2.3];
        let mut a = DMatrix::zeros(50, 3);
        let mut b = DMatrix::zeros(50, 3);
        m.jacobian(&p, &mut a);
        fd_jacobian(&m, &p, &mut b);
        assert!((a - b).amax() < 1e-7);
    }

    #[test]
    fn errors_scale_as_inverse_sqrt_n() {
        let rate = 0.8;
        let err = |n: usize, seed: u64| {
            let dt = 5.0 / n as f64;
            let s = noisy(seed, 0.01, n, dt, |t| (-rate * t).exp());
            fit_exp_decay(&s).unwrap().std_error("rate").unwrap()
        };
        for seed in 0..3 {
            let ratio = err(500, seed) / err(2000, seed + 100);
            assert!((ratio / 2.0 - 1.0).abs() < 0.5, "{ratio}");
        }
    }

    #[test]
    fn covariance_symmetric_psd() {
        let s = noisy(9, 0.02, 300, 0.02, |t| 1.5 * (-0.9 * t).exp() + 0.1);
        let f = fit_exp_decay(&s).unwrap();
        let c = DMatrix::from_fn(3, 3, |i, j| f.covariance[i][j]);
        assert!((c.clone() - c.transpose()).amax() < 1e-18);
        let eig = c.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|v| *v >= -1e-15));
    }

    proptest! {
        #[test]
        fn cost_never_increases(seed in 0u64..200, rate in 0.2f64..3.0) {
            let s = noisy(seed, 0.05, 200, 0.02, |t| (-rate * t).exp());
            let f = fit_exp_decay(&s).unwrap();
            prop_assert!(f.cost_history.windows(2).all(|w| w[1] <= w[0]));
            if f.converged {
                prop_assert!(f.gradient_norm <= LmOptions::default().gtol);
            }
        }

        #[test]
        fn noiseless_recovery(a in 0.1f64..5.0, rate in 0.1f64..5.0, off in -1.0f64..1.0) {
            let s = TimeSeries::from_fn(0.0, 0.01, 500, "", |t| off + a * (-rate * t).exp());
            let f = fit_exp_decay(&s).unwrap();
            prop_assert!((f.get("rate").unwrap() / rate - 1.0).abs() < 1e-6);
            prop_assert!((f.get("A").unwrap() / a - 1.0).abs() < 1e-6);
        }
    }
}
