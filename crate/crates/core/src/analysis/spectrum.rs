use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// One-sided periodogram of the mean-removed window.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdResult {
    /// Cycles per iteration, `k / window` for `k = 0 ..= window / 2`.
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl PsdResult {
    /// Frequency of the largest nonzero-frequency bin.
    pub fn dominant_frequency(&self) -> Option<f64> {
        let (i, p) = self.power.iter().enumerate().skip(1).max_by(|a, b| a.1.total_cmp(b.1))?;
        (*p > 0.0).then(|| self.freqs[i])
    }
}

/// Periodogram of the last `window` values of `series`.
///
/// Power is `c_k |X_k|^2 / window` with `c_k = 2` for interior bins and 1
/// at DC and Nyquist, so the powers sum to the window's sum of squared
/// deviations.
pub fn psd(series: &[f64], window: usize) -> Result<PsdResult> {
    if window < 2 || !window.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("window must be a power of two >= 2, got {window}")));
    }
    if series.len() < window {
        return Err(Error::InvalidArgument(format!("series has {} values, window is {window}", series.len())));
    }
    let x = &series[series.len() - window..];
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("psd input"));
    }
    let mean = x.iter().sum::<f64>() / window as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(window).process(&mut buf);
    let half = window / 2;
    let w = window as f64;
    let power = (0..=half)
        .map(|k| {
            let c = if k == 0 || k == half { 1.0 } else { 2.0 };
            c * buf[k].norm_sqr() / w
        })
        .collect();
    let freqs = (0..=half).map(|k| k as f64 / w).collect();
    Ok(PsdResult { freqs, power })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternation_is_a_nyquist_line() {
        let s: Vec<f64> = (0..64).map(|i| if i % 2 == 0 { 3.0 } else { 1.0 }).collect();
        let r = psd(&s, 64).unwrap();
        assert_eq!(r.freqs.len(), 33);
        for (k, p) in r.power.iter().enumerate() {
            if k == 32 {
                assert!((p - 64.0).abs() < 1e-9);
            } else {
                assert!(p.abs() < 1e-20);
            }
        }
        assert_eq!(r.dominant_frequency(), Some(0.5));
    }

    #[test]
    fn constant_has_no_power() {
        let r = psd(&[2.5; 16], 16).unwrap();
        assert!(r.power.iter().all(|p| *p == 0.0));
        assert_eq!(r.dominant_frequency(), None);
    }

    #[test]
    fn parseval() {
        let s: Vec<f64> = (0..256).map(|i| ((i * 37 % 101) as f64).sin() + 0.01 * i as f64).collect();
        let r = psd(&s, 128).unwrap();
        let x = &s[128..];
        let m = x.iter().sum::<f64>() / 128.0;
        let ss: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        assert!((r.power.iter().sum::<f64>() - ss).abs() < 1e-9 * ss);
    }

    #[test]
    fn bad_windows() {
        assert!(psd(&[1.0; 100], 100).is_err());
        assert!(psd(&[1.0; 10], 16).is_err());
        assert!(psd(&[1.0; 10], 1).is_err());
    }
}
