//! Seeded generators for the sequences used by the sweeps.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;

use crate::backend::{scaled_potential, BackendKind, Geometry, Potential};
use crate::error::Result;
use crate::numeric::legendre_with_derivative;

/// Random potential built from modes `|k|, |l| ≤ max_mode` (torus) or Legendre
/// degrees `1..=2·max_mode` (ℙ¹), scaled so that `max |ρ - 1| = spread`.
pub fn low_mode_potential<R: Rng + ?Sized>(
    geometry: &Arc<Geometry>,
    rng: &mut R,
    spread: f64,
    max_mode: i32,
) -> Potential {
    let mut v = vec![0.0; geometry.len()];
    match geometry.kind() {
        BackendKind::FlatTorus => {
            for k in -max_mode..=max_mode {
                for l in -max_mode..=max_mode {
                    if k == 0 && l == 0 {
                        continue;
                    }
                    let a: f64 = rng.random_range(-1.0..1.0);
                    let ph: f64 = rng.random_range(0.0..TAU);
                    for (x, s) in v.iter_mut().zip(geometry.sites()) {
                        *x += a * (TAU * (k as f64 * s[0] + l as f64 * s[1]) + ph).cos();
                    }
                }
            }
        }
        BackendKind::RoundP1 => {
            for l in 1..=(2 * max_mode.max(1)) as usize {
                let a: f64 = rng.random_range(-1.0..1.0);
                for (x, s) in v.iter_mut().zip(geometry.sites()) {
                    *x += a * legendre_with_derivative(l, s[1]).0;
                }
            }
        }
    }
    scaled_potential(geometry, v, spread)
}

/// `u_j = u + j^{-power} φ` for the given indices.
pub fn smooth_family(u: &Potential, phi: &Potential, indices: &[usize], power: f64) -> Result<Vec<Potential>> {
    indices
        .iter()
        .map(|&j| {
            let s = (j.max(1) as f64).powf(-power);
            let v = u.values().iter().zip(phi.values()).map(|(a, b)| a + s * b).collect();
            Potential::new(u.geometry().clone(), v)
        })
        .collect()
}

/// Transversally crossing pair: torus `(A cos 2πx, (A/2) sin 2πy)`, ℙ¹ `(A cos θ, -A cos θ)`.
pub fn crossing_pair(geometry: &Arc<Geometry>, amplitude: f64) -> Result<(Potential, Potential)> {
    let (a, b): (Vec<f64>, Vec<f64>) = match geometry.kind() {
        BackendKind::FlatTorus => geometry
            .sites()
            .iter()
            .map(|s| (amplitude * (TAU * s[0]).cos(), 0.5 * amplitude * (TAU * s[1]).sin()))
            .unzip(),
        BackendKind::RoundP1 => geometry
            .sites()
            .iter()
            .map(|s| (amplitude * s[1], -amplitude * s[1]))
            .unzip(),
    };
    Ok((
        Potential::normalized(geometry.clone(), a)?,
        Potential::normalized(geometry.clone(), b)?,
    ))
}

/// Pair whose difference touches zero with vanishing gradient along `x = 0`
/// (torus only): `(A cos 2πx, A cos 4πx)`.
pub fn tangential_pair(geometry: &Arc<Geometry>, amplitude: f64) -> Result<(Potential, Potential)> {
    let (a, b): (Vec<f64>, Vec<f64>) = geometry
        .sites()
        .iter()
        .map(|s| (amplitude * (TAU * s[0]).cos(), amplitude * (2.0 * TAU * s[0]).cos()))
        .unzip();
    Ok((
        Potential::normalized(geometry.clone(), a)?,
        Potential::normalized(geometry.clone(), b)?,
    ))
}

/// Converging densities `f_j = f + 2^{-j} g` with `f ≥ 0.1` and `|g| ≤ 0.1`
/// on `n` atoms, `j = 1..=len`.
pub fn vitali_convergent_family<R: Rng + ?Sized>(n: usize, len: usize, rng: &mut R) -> (Vec<Vec<f64>>, Vec<f64>) {
    let f: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
    let g: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
    let rate: f64 = rng.random_range(1.0..2.0);
    let seq = (1..=len)
        .map(|j| {
            let s = 2f64.powf(-rate * j as f64);
            f.iter().zip(&g).map(|(a, b)| a + s * b).collect()
        })
        .collect();
    (seq, f)
}

/// Mass escaping onto ever smaller sets: `f_j = f + 2^j` on the first `n/2^j`
/// atoms. Neither Vitali statistic vanishes.
pub fn escaping_mass_family(n: usize, len: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let f = vec![1.0; n];
    let seq = (1..=len)
        .map(|j| {
            let width = (n >> j).max(1);
            let h = n as f64 / width as f64;
            (0..n).map(|i| if i < width { 1.0 + h } else { 1.0 }).collect()
        })
        .collect();
    (seq, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{make_p1_geometry, make_torus_geometry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_are_admissible_and_deterministic() {
        for g in [make_torus_geometry(32).unwrap(), make_p1_geometry(64).unwrap()] {
            let a = low_mode_potential(&g, &mut ChaCha8Rng::seed_from_u64(1), 0.4, 1);
            let b = low_mode_potential(&g, &mut ChaCha8Rng::seed_from_u64(1), 0.4, 1);
            assert_eq!(a.values(), b.values());
            let fam = smooth_family(&a, &b, &[1, 2, 4], 2.0).unwrap();
            assert_eq!(fam.len(), 3);
            crossing_pair(&g, 0.02).unwrap();
        }
    }

    #[test]
    fn escaping_mass_keeps_unit_excess() {
        let (seq, _) = escaping_mass_family(1024, 6);
        for s in seq {
            let excess: f64 = s.iter().map(|v| v - 1.0).sum::<f64>() / 1024.0;
            assert!((excess - 1.0).abs() < 1e-12);
        }
    }
}
