use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled scalar record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// Time of the first sample, s.
    pub t0: f64,
    /// Sample interval, s.
    pub dt: f64,
    pub values: Vec<f64>,
    pub unit: String,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>, unit: impl Into<String>) -> Self {
        Self {
            t0,
            dt,
            values,
            unit: unit.into(),
        }
    }

    /// Builds a series by sampling `f` at `t0 + i dt`.
    pub fn from_fn(t0: f64, dt: f64, n: usize, unit: &str, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|i| f(t0 + i as f64 * dt)).collect();
        Self::new(t0, dt, values, unit)
    }

    /// Builds a series from explicit sample times, rejecting non-uniform grids.
    pub fn from_samples(times: &[f64], values: Vec<f64>, unit: &str) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Domain("times and values differ in length".into()));
        }
        if times.len() < 2 {
            return Err(Error::InsufficientData("need at least two samples".into()));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::NonUniformGrid { index: 1 });
        }
        for (i, &t) in times.iter().enumerate() {
            let expected = times[0] + i as f64 * dt;
            if (t - expected).abs() > 1e-6 * dt {
                return Err(Error::NonUniformGrid { index: i });
            }
        }
        Ok(Self::new(times[0], dt, values, unit))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.time(i))
    }

    /// Record length len * dt.
    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    /// Samples with `t >= t_start` (and `t <= t_end`).
    pub fn window(&self, t_start: f64, t_end: f64) -> TimeSeries {
        let i0 = ((t_start - self.t0) / self.dt).ceil().max(0.0) as usize;
        let i1 = (((t_end - self.t0) / self.dt).floor() + 1.0).clamp(0.0, self.len() as f64) as usize;
        let i0 = i0.min(i1);
        TimeSeries::new(
            self.time(i0),
            self.dt,
            self.values[i0..i1].to_vec(),
            self.unit.clone(),
        )
    }

    /// Applies `f` to every sample, keeping the grid.
    pub fn map_values(mut self, mut f: impl FnMut(f64) -> f64) -> Self {
        self.values.iter_mut().for_each(|v| *v = f(*v));
        self
    }

    pub fn mean_square(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_check() {
        let t: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let s = TimeSeries::from_samples(&t, vec![0.0; 10], "V").unwrap();
        assert!((s.dt - 0.1).abs() < 1e-15);
        let mut bad = t.clone();
        bad[4] += 0.03;
        assert!(matches!(
            TimeSeries::from_samples(&bad, vec![0.0; 10], "V"),
            Err(Error::NonUniformGrid { index: 4 })
        ));
    }

    #[test]
    fn window_bounds() {
        let s = TimeSeries::from_fn(0.0, 0.5, 21, "V", |t| t);
        let w = s.window(2.0, 4.0);
        assert_eq!(w.values, vec![2.0, 2.5, 3.0, 3.5, 4.0]);
        assert_eq!(w.t0, 2.0);
        assert!(s.window(20.0, 30.0).is_empty());
    }
}
