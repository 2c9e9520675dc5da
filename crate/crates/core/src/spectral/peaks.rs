use serde::{Deserialize, Serialize};

use super::{Spectrum, SpectrumKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Interpolated centre frequency, Hz.
    pub freq: f64,
    /// Interpolated height, in the spectrum's units.
    pub amplitude: f64,
    /// Full width at half maximum, Hz, when it could be measured.
    pub fwhm: Option<f64>,
    /// Sideband order, when assigned by the caller.
    pub order_k: Option<i64>,
    /// Index of the maximal bin.
    pub bin: usize,
}

/// Three-point interpolation around bin `i`. A parabola through the log
/// magnitudes is exact for Gaussian lobes and close for Hann/Blackman ones.
pub(crate) fn refine(spec: &Spectrum, i: usize) -> Peak {
    let v = &spec.values;
    let mut peak = Peak {
        freq: spec.freqs[i],
        amplitude: v[i],
        fwhm: None,
        order_k: None,
        bin: i,
    };
    if i == 0 || i + 1 >= v.len() {
        return peak;
    }
    let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
    let (la, lb, lc, log) = if a > 0.0 && b > 0.0 && c > 0.0 {
        (a.ln(), b.ln(), c.ln(), true)
    } else {
        (a, b, c, false)
    };
    let den = la - 2.0 * lb + lc;
    if den >= 0.0 {
        return peak;
    }
    let delta = (0.5 * (la - lc) / den).clamp(-0.5, 0.5);
    let top = lb - 0.25 * (la - lc) * delta;
    peak.freq = spec.freqs[i] + delta * spec.resolution_hz;
    peak.amplitude = if log { top.exp() } else { top };
    peak
}

/// Local maxima at or above `rel_threshold` times the global maximum.
///
/// Candidates closer than `min_separation` are merged greedily: the tallest
/// is kept and anything within `min_separation` of a kept peak is dropped.
/// The result is sorted by frequency; widths are filled in where the half
/// maximum is bracketed.
pub fn find_peaks(spec: &Spectrum, rel_threshold: f64, min_separation: f64) -> Vec<Peak> {
    let v = &spec.values;
    if v.len() < 3 {
        return Vec::new();
    }
    let (_, max) = spec.argmax();
    let thresh = rel_threshold.clamp(0.0, 1.0) * max;
    let mut cand: Vec<usize> = (1..v.len() - 1)
        .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] >= thresh && v[i] > 0.0)
        .collect();
    cand.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    let mut kept: Vec<usize> = Vec::new();
    for i in cand {
        if kept
            .iter()
            .all(|&j| (spec.freqs[i] - spec.freqs[j]).abs() >= min_separation)
        {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept.into_iter()
        .map(|i| {
            let mut p = refine(spec, i);
            p.fwhm = fwhm(spec, &p).ok();
            p
        })
        .collect()
}

/// Full width of `peak` at half its power, by linear interpolation between
/// bins. For amplitude spectra the crossing level is `amplitude / sqrt(2)`.
pub fn fwhm(spec: &Spectrum, peak: &Peak) -> Result<f64> {
    let v = &spec.values;
    let level = match spec.kind {
        SpectrumKind::Amplitude => peak.amplitude * std::f64::consts::FRAC_1_SQRT_2,
        SpectrumKind::Psd => 0.5 * peak.amplitude,
    };
    let i = peak.bin.min(v.len() - 1);
    let fail = || Error::HalfMaxNotBracketed { freq_hz: peak.freq };
    let cross = |j: usize, k: usize| {
        spec.freqs[j] + (level - v[j]) / (v[k] - v[j]) * (spec.freqs[k] - spec.freqs[j])
    };

    let mut j = i;
    while v[j] > level {
        if j == 0 || v[j - 1] > v[j] {
            return Err(fail());
        }
        j -= 1;
    }
    let left = cross(j, j + 1);

    let mut k = i;
    while v[k] > level {
        if k + 1 == v.len() || v[k + 1] > v[k] {
            return Err(fail());
        }
        k += 1;
    }
    let right = cross(k, k - 1);
    Ok(right - left)
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::series::TimeSeries;
    use std::f64::consts::PI;

    fn tone(fs: f64, dur: f64, parts: &[(f64, f64)]) -> TimeSeries {
        TimeSeries::from_fn(0.0, 1.0 / fs, (dur * fs) as usize, "", |t| {
            parts.iter().map(|(f, a)| a * (2.0 * PI * f * t).cos()).sum()
        })
    }

    #[test]
    fn single_tone_single_peak() {
        let s = tone(50.0, 40.0, &[(8.915, 1.0)]);
        let sp = amplitude_spectrum_padded(&s, Window::Hann, PEAK_PAD).unwrap();
        let p = find_peaks(&sp, 0.01, 0.1);
        assert_eq!(p.len(), 1);
        assert!((p[0].amplitude - 1.0).abs() < 0.01);
    }

    #[test]
    fn close_tones_merge_to_taller() {
        let s = tone(50.0, 40.0, &[(8.0, 1.0), (8.3, 0.6)]);
        let sp = amplitude_spectrum_padded(&s, Window::Hann, PEAK_PAD).unwrap();
        assert_eq!(find_peaks(&sp, 0.1, 0.1).len(), 2);
        let merged = find_peaks(&sp, 0.1, 0.5);
        assert_eq!(merged.len(), 1);
        assert!((merged[0].freq - 8.0).abs() < 0.01);
    }

    #[test]
    fn empty_for_flat_spectrum() {
        let s = TimeSeries::new(0.0, 0.1, vec![0.0; 64], "");
        let sp = amplitude_spectrum(&s, Window::Hann).unwrap();
        assert!(find_peaks(&sp, 0.5, 0.1).is_empty());
    }

    #[test]
    fn fwhm_of_rectangular_record() {
        // half-power width of a rectangular window is 0.886/T
        let s = tone(20.0, 4000.0, &[(8.915, 1.0)]);
        let sp = amplitude_spectrum_padded(&s, Window::Rectangular, PEAK_PAD).unwrap();
        let p = find_peaks(&sp, 0.5, 0.01);
        let w = p[0].fwhm.unwrap();
        assert!(w <= 0.3e-3, "{w}");
        assert!((w * 4000.0 / 0.8859 - 1.0).abs() < 0.05, "{w}");

        let short = tone(20.0, 60.0, &[(8.915, 1.0)]);
        let sp = amplitude_spectrum_padded(&short, Window::Rectangular, PEAK_PAD).unwrap();
        let w60 = fwhm(&sp, &find_peaks(&sp, 0.5, 0.01)[0]).unwrap();
        assert!(w60 > 10e-3);
        let long = tone(20.0, 120.0, &[(8.915, 1.0)]);
        let sp = amplitude_spectrum_padded(&long, Window::Rectangular, PEAK_PAD).unwrap();
        let w120 = fwhm(&sp, &find_peaks(&sp, 0.5, 0.01)[0]).unwrap();
        assert!((w60 / w120 - 2.0).abs() < 0.2);
    }

    #[test]
    fn fwhm_unbracketed_is_error() {
        let sp = Spectrum {
            freqs: vec![0.0, 1.0, 2.0, 3.0],
            values: vec![1.0, 0.9, 0.95, 0.2],
            kind: SpectrumKind::Amplitude,
            window: Window::Rectangular,
            resolution_hz: 1.0,
            record_s: 1.0,
            averages: 1,
        };
        let p = refine(&sp, 2);
        assert!(matches!(fwhm(&sp, &p), Err(Error::HalfMaxNotBracketed { .. })));
    }

    #[test]
    fn psd_width_uses_half_power() {
        let s = tone(20.0, 200.0, &[(3.0, 1.0)]);
        let a = amplitude_spectrum_padded(&s, Window::Rectangular, 8).unwrap();
        let mut p = a.clone();
        p.kind = SpectrumKind::Psd;
        p.values.iter_mut().for_each(|v| *v = *v * *v);
        let wa = fwhm(&a, &find_peaks(&a, 0.5, 0.01)[0]).unwrap();
        let wp = fwhm(&p, &find_peaks(&p, 0.5, 0.01)[0]).unwrap();
        assert!((wa / wp - 1.0).abs() < 0.01);
    }
}
