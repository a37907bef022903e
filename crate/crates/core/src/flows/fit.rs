//! Least-squares exponential rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `value ≈ amplitude · exp(-rate · t)` on a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub amplitude: f64,
    pub rate: f64,
    /// root-mean-square residual of the `log value` fit
    pub residual: f64,
    pub samples: usize,
}

/// Fits `log value = log A - λ t` over the samples with `t` in `window`.
pub fn exp_rate_fit(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<RateFit> {
    if times.len() != values.len() {
        return Err(Error::ShapeMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    let mut pts = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::FitDomain { time: t, value: v });
        }
        pts.push((t, v.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::Precondition(format!("{} samples in the fit window", pts.len())));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Precondition("fit window holds a single time".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateFit {
        amplitude: intercept.exp(),
        rate: -slope,
        residual,
        samples: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Vec<f64> {
        (0..101).map(|i| i as f64 * 0.05).collect()
    }

    #[test]
    fn exact_exponential() {
        let t = grid();
        let v: Vec<f64> = t.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let f = exp_rate_fit(&t, &v, (0.0, 5.0)).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-8);
        assert!((f.amplitude - 3.0).abs() < 1e-8);
        assert!(f.residual < 1e-10);
    }

    #[test]
    fn constant_series_has_zero_rate() {
        let t = grid();
        let f = exp_rate_fit(&t, &vec![0.7; t.len()], (1.0, 4.0)).unwrap();
        assert!(f.rate.abs() < 1e-14);
    }

    #[test]
    fn noisy_exponential_within_noise_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = grid();
        let sigma = 0.01;
        let v: Vec<f64> = t
            .iter()
            .map(|t| (-1.5 * t).exp() * (1.0 + sigma * rng.random_range(-1.0..1.0)))
            .collect();
        let f = exp_rate_fit(&t, &v, (0.0, 5.0)).unwrap();
        // slope standard error for uniform noise on a log scale
        let se = sigma / (3f64.sqrt()) / (t.len() as f64 * 5.0 * 5.0 / 12.0).sqrt();
        assert!((f.rate - 1.5).abs() < 5.0 * se, "{} (se {se})", f.rate);
    }

    #[test]
    fn nonpositive_values_are_rejected() {
        let t = grid();
        let mut v = vec![1.0; t.len()];
        v[10] = 0.0;
        assert!(matches!(exp_rate_fit(&t, &v, (0.0, 5.0)), Err(Error::FitDomain { .. })));
        // outside the window they are ignored
        assert!(exp_rate_fit(&t, &v, (1.0, 5.0)).is_ok());
    }
}
