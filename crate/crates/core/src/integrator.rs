//! Explicit Runge-Kutta integrators with dense output.
//!
//! [`Solver::advance`] steps to an exact target time and hands every accepted
//! step to a callback as a [`Segment`] that can be evaluated anywhere inside
//! the step. The adaptive scheme is Dormand-Prince 5(4) with local
//! extrapolation, error-per-unit-step control and its fourth-order continuous
//! extension; the fixed-step scheme is classical RK4 with cubic Hermite
//! interpolation.

use crate::error::{Error, Result};

pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        self(t, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Rk4 { step: f64 },
    Dopri5(AdaptiveOptions),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    /// Allowed local error per unit time, relative to `scale`.
    pub tolerance: f64,
    /// Magnitude against which errors are measured; the running state norm
    /// is used when it is larger.
    pub scale: f64,
    pub max_step: f64,
    pub min_step: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Stats {
    pub steps: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Interpolant over one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    coeffs: Interp<N>,
}

#[derive(Debug, Clone, Copy)]
enum Interp<const N: usize> {
    Hermite { f0: [f64; N], f1: [f64; N] },
    Dopri { r2: [f64; N], r3: [f64; N], r4: [f64; N], r5: [f64; N] },
}

impl<const N: usize> Segment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let mut out = [0.0; N];
        match &self.coeffs {
            Interp::Hermite { f0, f1 } => {
                let h00 = (1.0 + 2.0 * s) * s1 * s1;
                let h10 = s * s1 * s1;
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = -s * s * s1;
                for i in 0..N {
                    out[i] = h00 * self.y0[i]
                        + h10 * self.h * f0[i]
                        + h01 * self.y1[i]
                        + h11 * self.h * f1[i];
                }
            }
            Interp::Dopri { r2, r3, r4, r5 } => {
                for i in 0..N {
                    out[i] = self.y0[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])));
                }
            }
        }
        out
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension (Hairer & Wanner, dopri5 `contd5`).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

fn norm_inf<const N: usize>(y: &[f64; N]) -> f64 {
    y.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn all_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Integrator state: current time, state, derivative and step guess.
#[derive(Debug, Clone)]
pub struct Solver<const N: usize> {
    method: Method,
    t: f64,
    y: [f64; N],
    f: [f64; N],
    h: f64,
    max_steps: usize,
    stats: Stats,
}

impl<const N: usize> Solver<N> {
    pub fn new<S: OdeSystem<N>>(
        sys: &S,
        method: Method,
        t0: f64,
        y0: [f64; N],
        max_steps: usize,
    ) -> Result<Self> {
        if !all_finite(&y0) {
            return Err(Error::NonFinite { t: t0 });
        }
        let f = sys.rhs(t0, &y0);
        let h = match method {
            Method::Rk4 { step } => step,
            Method::Dopri5(o) => {
                let scale = o.scale.max(norm_inf(&y0));
                let fn_ = norm_inf(&f);
                let guess = if fn_ > 0.0 { 0.01 * scale / fn_ } else { o.max_step };
                guess.clamp(10.0 * o.min_step, o.max_step)
            }
        };
        Ok(Self {
            method,
            t: t0,
            y: y0,
            f,
            h,
            max_steps,
            stats: Stats {
                rhs_evals: 1,
                ..Stats::default()
            },
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> [f64; N] {
        self.y
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Re-evaluates the cached derivative after the system has changed,
    /// e.g. when a piecewise-constant input switches.
    pub fn refresh<S: OdeSystem<N>>(&mut self, sys: &S) {
        self.f = sys.rhs(self.t, &self.y);
        self.stats.rhs_evals += 1;
    }

    /// Integrates up to exactly `t_end`, calling `on_step` for every accepted step.
    pub fn advance<S, F>(&mut self, sys: &S, t_end: f64, mut on_step: F) -> Result<()>
    where
        S: OdeSystem<N>,
        F: FnMut(&Segment<N>),
    {
        while self.t < t_end {
            if self.stats.steps >= self.max_steps {
                return Err(Error::TooManySteps {
                    t: self.t,
                    max_steps: self.max_steps,
                });
            }
            let remaining = t_end - self.t;
            let seg = match self.method {
                Method::Rk4 { step } => self.rk4_step(sys, step.min(remaining)),
                Method::Dopri5(o) => self.dopri_step(sys, &o, remaining)?,
            };
            if !all_finite(&seg.y1) {
                return Err(Error::NonFinite { t: seg.t1() });
            }
            // Land exactly on the target so callers can chain intervals.
            self.t = if seg.h == remaining { t_end } else { seg.t1() };
            self.y = seg.y1;
            self.stats.steps += 1;
            on_step(&seg);
        }
        Ok(())
    }

    fn rk4_step<S: OdeSystem<N>>(&mut self, sys: &S, h: f64) -> Segment<N> {
        let (t, y, k1) = (self.t, self.y, self.f);
        let k2 = sys.rhs(t + 0.5 * h, &axpy(&y, 0.5 * h, &[(1.0, &k1)]));
        let k3 = sys.rhs(t + 0.5 * h, &axpy(&y, 0.5 * h, &[(1.0, &k2)]));
        let k4 = sys.rhs(t + h, &axpy(&y, h, &[(1.0, &k3)]));
        let y1 = axpy(&y, h / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)]);
        let f1 = sys.rhs(t + h, &y1);
        self.stats.rhs_evals += 4;
        self.f = f1;
        Segment {
            t0: t,
            h,
            y0: y,
            y1,
            coeffs: Interp::Hermite { f0: k1, f1 },
        }
    }

    fn dopri_step<S: OdeSystem<N>>(
        &mut self,
        sys: &S,
        o: &AdaptiveOptions,
        remaining: f64,
    ) -> Result<Segment<N>> {
        let (t, y, k1) = (self.t, self.y, self.f);
        loop {
            let h_try = self.h;
            let h = h_try.min(remaining);
            let k2 = sys.rhs(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
            let k3 = sys.rhs(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = sys.rhs(
                t + C4 * h,
                &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = sys.rhs(
                t + C5 * h,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = sys.rhs(
                t + h,
                &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            );
            let y1 = axpy(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = sys.rhs(t + h, &y1);
            self.stats.rhs_evals += 6;

            let err_vec = axpy(
                &[0.0; N],
                h,
                &[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)],
            );
            let scale = o.scale.max(norm_inf(&y)).max(norm_inf(&y1));
            // error per unit step: |local error| <= tol * h * scale
            let err = norm_inf(&err_vec) / (o.tolerance * h * scale);
            let err = if err.is_nan() { f64::INFINITY } else { err };

            if err <= 1.0 {
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.25)).clamp(0.2, 5.0) };
                self.h = (h * fac).max(if h < h_try { h_try } else { 0.0 }).min(o.max_step);
                self.f = k7;
                let mut r2 = [0.0; N];
                let mut r3 = [0.0; N];
                let mut r4 = [0.0; N];
                let mut r5 = [0.0; N];
                for i in 0..N {
                    let dy = y1[i] - y[i];
                    let bspl = h * k1[i] - dy;
                    r2[i] = dy;
                    r3[i] = bspl;
                    r4[i] = dy - h * k7[i] - bspl;
                    r5[i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                return Ok(Segment {
                    t0: t,
                    h,
                    y0: y,
                    y1,
                    coeffs: Interp::Dopri { r2, r3, r4, r5 },
                });
            }

            self.stats.rejected += 1;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.25)).clamp(0.1, 0.9) } else { 0.1 };
            self.h = h * fac;
            if self.h < o.min_step {
                return Err(Error::StepUnderflow { t, h: self.h });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(w: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
        move |_t, y| [w * y[1], -w * y[0]]
    }

    fn adaptive(tol: f64) -> Method {
        Method::Dopri5(AdaptiveOptions {
            tolerance: tol,
            scale: 1.0,
            max_step: 1.0,
            min_step: 1e-12,
        })
    }

    #[test]
    fn dopri_matches_exact_rotation() {
        let w = 2.0 * std::f64::consts::PI * 8.85;
        let sys = oscillator(w);
        let mut s = Solver::new(&sys, adaptive(1e-10), 0.0, [1.0, 0.0], 1_000_000).unwrap();
        s.advance(&sys, 10.0, |_| {}).unwrap();
        let y = s.state();
        assert!((y[0] - (w * 10.0).cos()).abs() < 1e-8, "{y:?}");
        assert!((y[1] + (w * 10.0).sin()).abs() < 1e-8);
        assert_eq!(s.time(), 10.0);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let sys = |_t: f64, y: &[f64; 1]| [-y[0]];
        let err = |h: f64| {
            let mut s = Solver::new(&sys, Method::Rk4 { step: h }, 0.0, [1.0], 1 << 30).unwrap();
            s.advance(&sys, 1.0, |_| {}).unwrap();
            (s.state()[0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 16.0).abs() < 1.0, "{ratio}");
    }

    #[test]
    fn dense_output_tracks_solution_inside_steps() {
        let w = 2.0 * std::f64::consts::PI * 3.0;
        let sys = oscillator(w);
        let mut s = Solver::new(&sys, adaptive(1e-9), 0.0, [1.0, 0.0], 1_000_000).unwrap();
        let mut worst = 0.0f64;
        s.advance(&sys, 2.0, |seg| {
            for j in 1..8 {
                let t = seg.t0 + seg.h * j as f64 / 8.0;
                let y = seg.eval(t);
                worst = worst.max((y[0] - (w * t).cos()).abs());
            }
        })
        .unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn hermite_interpolates_endpoints() {
        let sys = |_t: f64, y: &[f64; 1]| [y[0]];
        let mut s = Solver::new(&sys, Method::Rk4 { step: 0.1 }, 0.0, [1.0], 100).unwrap();
        s.advance(&sys, 0.1, |seg| {
            assert_eq!(seg.eval(seg.t0)[0], seg.y0[0]);
            assert!((seg.eval(seg.t1())[0] - seg.y1[0]).abs() < 1e-15);
        })
        .unwrap();
    }

    #[test]
    fn stiff_problem_underflows() {
        // dy/dt = y^3 blows up at t = 0.5; steps shrink toward the singularity
        let sys = |_t: f64, y: &[f64; 1]| [y[0] * y[0] * y[0]];
        let mut s = Solver::new(&sys, adaptive(1e-9), 0.0, [1.0], 1_000_000).unwrap();
        let err = s.advance(&sys, 1.0, |_| {}).unwrap_err();
        match err {
            Error::StepUnderflow { t, .. } | Error::NonFinite { t } => assert!(t > 0.4 && t <= 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn step_budget_is_enforced() {
        let sys = oscillator(1.0);
        let mut s = Solver::new(&sys, Method::Rk4 { step: 1e-3 }, 0.0, [1.0, 0.0], 10).unwrap();
        assert!(matches!(
            s.advance(&sys, 1.0, |_| {}),
            Err(Error::TooManySteps { max_steps: 10, .. })
        ));
    }
}
