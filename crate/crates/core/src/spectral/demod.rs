use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Output of [`demodulate`]: complex envelope split into magnitude and
/// unwrapped phase, both on the filter's valid region.
#[derive(Debug, Clone, PartialEq)]
pub struct Demodulated {
    pub envelope: TimeSeries,
    /// Phase relative to the reference, rad, unwrapped.
    pub phase: TimeSeries,
    /// Length of the low-pass kernel; `(taps - 1) / 2` samples are dropped
    /// at each end.
    pub taps: usize,
}

/// Blackman-windowed sinc with unit DC gain. With `taps = 11 fs / fc` the
/// passband is flat to about `0.75 fc` and the stopband starts near `1.25 fc`.
fn lowpass_kernel(cutoff: f64, fs: f64) -> Vec<f64> {
    let mut taps = (11.0 * fs / cutoff).ceil() as usize;
    taps |= 1;
    let m = (taps - 1) as f64;
    let fc = cutoff / fs;
    let mut h: Vec<f64> = (0..taps)
        .map(|j| {
            let x = j as f64 - m / 2.0;
            let sinc = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * x).sin() / (PI * x)
            };
            let w = 0.42 - 0.5 * (2.0 * PI * j as f64 / m).cos() + 0.08 * (4.0 * PI * j as f64 / m).cos();
            sinc * w
        })
        .collect();
    let s: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= s);
    h
}

/// Mixes `series` down by `ref_freq` in quadrature and low-passes at
/// `lp_cutoff`, giving the instantaneous amplitude and phase.
///
/// A tone `A cos(2 pi (ref_freq + d) t + phi)` yields envelope `A` and phase
/// `2 pi d t + phi`.
pub fn demodulate(series: &TimeSeries, ref_freq: f64, lp_cutoff: f64) -> Result<Demodulated> {
    let fs = series.sample_rate();
    if !(ref_freq > 0.0) || ref_freq >= fs / 4.0 {
        return Err(Error::Domain(format!(
            "reference {ref_freq} Hz must lie in (0, {}) Hz",
            fs / 4.0
        )));
    }
    if !(lp_cutoff > 0.0) || lp_cutoff >= ref_freq / 2.0 {
        return Err(Error::Domain(format!(
            "low-pass cutoff {lp_cutoff} Hz must lie in (0, {}) Hz",
            ref_freq / 2.0
        )));
    }
    let h = lowpass_kernel(lp_cutoff, fs);
    let taps = h.len();
    let n = series.len();
    if n < taps {
        return Err(Error::InsufficientData(format!(
            "{n} samples but the low-pass needs {taps}"
        )));
    }

    let size = (n + taps - 1).next_power_of_two();
    let mut z = vec![Complex64::new(0.0, 0.0); size];
    for (i, (zi, x)) in z.iter_mut().zip(&series.values).enumerate() {
        let arg = -2.0 * PI * ref_freq * series.time(i);
        *zi = Complex64::from_polar(2.0 * x, arg);
    }
    let mut k = vec![Complex64::new(0.0, 0.0); size];
    for (ki, hi) in k.iter_mut().zip(&h) {
        ki.re = *hi;
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    fwd.process(&mut z);
    fwd.process(&mut k);
    for (a, b) in z.iter_mut().zip(&k) {
        *a *= b / size as f64;
    }
    inv.process(&mut z);

    // full convolution index i + taps - 1 is centred on input sample i + (taps - 1) / 2
    let half = (taps - 1) / 2;
    let valid = &z[taps - 1..n];
    let mut phase = Vec::with_capacity(valid.len());
    let mut last = 0.0;
    let mut offset = 0.0;
    for (j, c) in valid.iter().enumerate() {
        let raw = c.arg();
        if j > 0 {
            let d = raw - last;
            if d > PI {
                offset -= 2.0 * PI;
            } else if d < -PI {
                offset += 2.0 * PI;
            }
        }
        last = raw;
        phase.push(raw + offset);
    }
    let t0 = series.time(half);
    Ok(Demodulated {
        envelope: TimeSeries::new(t0, series.dt, valid.iter().map(|c| c.norm()).collect(), &series.unit),
        phase: TimeSeries::new(t0, series.dt, phase, "rad"),
        taps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slope(ts: &TimeSeries) -> f64 {
        let n = ts.len() as f64;
        let t: Vec<f64> = ts.times().collect();
        let mt = t.iter().sum::<f64>() / n;
        let my = ts.values.iter().sum::<f64>() / n;
        let sxy: f64 = t.iter().zip(&ts.values).map(|(t, y)| (t - mt) * (y - my)).sum();
        let sxx: f64 = t.iter().map(|t| (t - mt) * (t - mt)).sum();
        sxy / sxx
    }

    #[test]
    fn pure_tone_gives_flat_envelope() {
        let s = TimeSeries::from_fn(0.0, 0.005, 8000, "", |t| 0.37 * (2.0 * PI * 8.915 * t + 0.4).cos());
        let d = demodulate(&s, 8.915, 1.0).unwrap();
        assert!(d.envelope.values.iter().all(|a| (a / 0.37 - 1.0).abs() < 0.01));
        assert!(slope(&d.phase).abs() < 1e-6);
        assert!((d.phase.values[100] - 0.4).abs() < 1e-3);
        assert_eq!(d.envelope.len(), s.len() - d.taps + 1);
        assert_eq!(d.envelope.t0, (d.taps - 1) as f64 / 2.0 * 0.005);
    }

    #[test]
    fn detuning_gives_phase_slope() {
        for delta in [-0.3, 0.01, 0.25] {
            let s = TimeSeries::from_fn(0.0, 0.005, 20_000, "", |t| (2.0 * PI * (8.915 + delta) * t).cos());
            let d = demodulate(&s, 8.915, 1.0).unwrap();
            let w = slope(&d.phase);
            assert!((w / (2.0 * PI * delta) - 1.0).abs() < 0.01, "{delta}: {w}");
        }
    }

    #[test]
    fn envelope_round_trip() {
        // envelope band-limited to 0.2 Hz, below half the 1 Hz cutoff
        let env = |t: f64| 1.0 + 0.5 * (2.0 * PI * 0.2 * t).sin();
        let s = TimeSeries::from_fn(0.0, 0.005, 20_000, "", |t| env(t) * (2.0 * PI * 8.0 * t).cos());
        let d = demodulate(&s, 8.0, 1.0).unwrap();
        let mut se = 0.0;
        for (i, a) in d.envelope.values.iter().enumerate() {
            let e = a - env(d.envelope.time(i));
            se += e * e;
        }
        let rms = (se / d.envelope.len() as f64).sqrt();
        assert!(rms < 0.01, "{rms}");
    }

    #[test]
    fn preconditions() {
        let s = TimeSeries::from_fn(0.0, 0.005, 4000, "", |t| t.cos());
        assert!(demodulate(&s, 60.0, 1.0).is_err());
        assert!(demodulate(&s, 8.0, 5.0).is_err());
        assert!(demodulate(&s, 8.0, 0.0).is_err());
        assert!(matches!(demodulate(&s, 8.0, 0.01), Err(Error::InsufficientData(_))));
    }
}
