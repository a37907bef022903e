//! Relative entropy `∫ ρ log ρ ω`, the Kullback–Pinsker comparison, and the
//! truncate-then-mollify smoothing of nonnegative densities.

use serde::{Deserialize, Serialize};

use crate::backend::{Geometry, Potential};
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

/// `κ / V` in `(∫|f - g| ω)² ≤ κ ∫ f log(f/g) ω`, as produced by
/// [`calibrate_pinsker_constant`] and frozen here.
pub const PINSKER_KAPPA_PER_VOLUME: f64 = 2.0;

/// Initial mollification time of [`smoothing_sequence`], in units of `V`.
const MOLLIFY_TIME: f64 = 1e-3;

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `∫ ρ log ρ ω` of an arbitrary nonnegative grid density.
pub fn density_entropy(geometry: &Geometry, rho: &[f64]) -> f64 {
    compensated_sum(rho.iter().zip(geometry.weights()).map(|(r, w)| w * xlogx(*r)))
}

/// `Ent(ω, ω_u) = ∫ ρ_u log ρ_u ω ≥ 0`.
pub fn entropy(u: &Potential) -> f64 {
    density_entropy(u.geometry(), u.density_values()).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinskerGap {
    /// `(∫ |f - g| ω)²`
    pub lhs: f64,
    /// `∫ f log(f/g) ω`
    pub rhs: f64,
    /// the frozen constant for this volume
    pub kappa: f64,
}

impl PinskerGap {
    pub fn holds(&self) -> bool {
        self.lhs <= self.kappa * self.rhs * (1.0 + 1e-12) + 1e-300
    }
}

fn check_unit_mean(geometry: &Geometry, f: &[f64]) -> Result<()> {
    geometry.check_len(f)?;
    if let Some(i) = f.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NotKahler { site: i, density: f[i] });
    }
    let m = geometry.mean(f);
    if (m - 1.0).abs() > 1e-9 {
        return Err(Error::InconsistentDensity { mean: m });
    }
    Ok(())
}

/// Both sides of the Kullback–Pinsker inequality for unit-mean positive densities.
pub fn pinsker_gap(geometry: &Geometry, f: &[f64], g: &[f64]) -> Result<PinskerGap> {
    check_unit_mean(geometry, f)?;
    check_unit_mean(geometry, g)?;
    let l1 = compensated_sum(f.iter().zip(g).zip(geometry.weights()).map(|((a, b), w)| w * (a - b).abs()));
    let kl = compensated_sum(
        f.iter()
            .zip(g)
            .zip(geometry.weights())
            .map(|((a, b), w)| w * (a * (a / b).ln() - a + b)),
    );
    Ok(PinskerGap {
        lhs: l1 * l1,
        rhs: kl.max(0.0),
        kappa: PINSKER_KAPPA_PER_VOLUME * geometry.volume(),
    })
}

/// Two-cell closed form: `f = (a, 2-a)`, `g = (1, 1)` on two cells of mass `V/2`.
/// Returns `(lhs, rhs)`.
pub fn two_cell_pinsker(volume: f64, a: f64) -> (f64, f64) {
    let lhs = (volume * (a - 1.0).abs()).powi(2);
    let rhs = 0.5 * volume * (xlogx(a) + xlogx(2.0 - a));
    (lhs, rhs)
}

/// Sharpest `κ` with `lhs ≤ κ·rhs` over the two-cell family: the ratio increases
/// towards `a → 1`, so it is sampled at two small offsets and Richardson-extrapolated.
pub fn calibrate_pinsker_constant(volume: f64) -> f64 {
    let ratio = |e: f64| {
        let (l, r) = two_cell_pinsker(volume, 1.0 + e);
        l / r
    };
    // ratio(e) = κ (1 - e²/6 + O(e⁴)) for the symmetric two-cell family
    let (r1, r2) = (ratio(1e-2), ratio(5e-3));
    (4.0 * r2 - r1) / 3.0
}

/// `f̃_k`: clamp `f` to `[2^{-k}, 2^k]`, then apply the heat semigroup for time
/// `τ_k = 10^{-3} V · 4^{-k}`. The output is positive and bounded by the clamp range,
/// the heat step preserves the integral.
pub fn smoothing_sequence(geometry: &Geometry, f: &[f64], k: u32) -> Result<Vec<f64>> {
    geometry.check_len(f)?;
    if let Some(i) = f.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("density must be finite and nonnegative (site {i}: {})", f[i])));
    }
    let m = 2f64.powi(k as i32);
    let clamped: Vec<f64> = f.iter().map(|v| v.clamp(1.0 / m, m)).collect();
    let tau = MOLLIFY_TIME * geometry.volume() * 0.25f64.powi(k as i32);
    let smooth = geometry.apply_spectral(&clamped, |l| (tau * l).exp());
    // the heat kernel is positivity preserving; the floor guards rounding
    Ok(smooth.into_iter().map(|v| v.clamp(1.0 / m, m)).collect())
}

/// `(∫|f - f̃|ω, ∫ f (log f - log f̃) ω)` for one smoothed density.
pub fn smoothing_statistics(geometry: &Geometry, f: &[f64], smoothed: &[f64]) -> (f64, f64) {
    let w = geometry.weights();
    let l1 = compensated_sum(f.iter().zip(smoothed).zip(w).map(|((a, b), w)| w * (a - b).abs()));
    let ent = compensated_sum(
        f.iter()
            .zip(smoothed)
            .zip(w)
            .map(|((a, b), w)| if *a > 0.0 { w * a * (a.ln() - b.ln()) } else { 0.0 }),
    );
    (l1, ent)
}
