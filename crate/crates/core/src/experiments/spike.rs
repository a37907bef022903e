//! Truncated spike densities `f_K` concentrating mass `∝ k^{-s}` on the nested
//! shells `U_k = {k < |u|^{p′} ≤ k+1}` of a logarithmic model potential. At
//! `s = 2` the densities are `L¹`-Cauchy while `∫|u|^{p′} ω_{v_K}` grows like the
//! harmonic numbers.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{log_log_slope, push_stat, SequenceExperiment, VerdictTable};
use crate::backend::{calabi_yau_inverse, make_torus_geometry, Geometry, Potential};
use crate::error::{Error, Result};
use crate::finsler::{calabi_cauchy_stat, mabuchi_cauchy_stat};
use crate::numeric::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeConfig {
    /// torus resolution
    pub resolution: usize,
    /// largest truncation level; the family runs over `K = 1..=k_max`
    pub k_max: usize,
    pub p_prime: f64,
    /// outer radius of the logarithmic profile
    pub outer_radius: f64,
    /// shell coefficients decay like `k^{-s}`; `s = 2` is the harmonic-series family
    pub coefficient_exponent: f64,
    /// uniform background mass fraction keeping every density positive
    pub background: f64,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        SpikeConfig {
            resolution: 256,
            k_max: 64,
            p_prime: 1.0,
            outer_radius: 0.5,
            coefficient_exponent: 2.0,
            background: 1e-3,
        }
    }
}

/// The model profile `a = |u|^{p′} = 1 + κ·max(0, log(R₀/max(r, h/2)))` and its shells.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeProfile {
    pub kappa: f64,
    /// the profile reaches level `K_max + 1` at radius `inner_factor · h`
    pub inner_factor: f64,
    pub values: Vec<f64>,
    /// site indices of `U_1..U_{K_max}`
    pub shells: Vec<Vec<usize>>,
    /// sites with `a ≤ 1`
    pub outer: Vec<usize>,
}

impl SpikeProfile {
    /// The model potential `u = -a^{1/p′}`.
    pub fn model_potential(&self, p_prime: f64) -> Vec<f64> {
        self.values.iter().map(|a| -a.powf(1.0 / p_prime)).collect()
    }
}

fn periodic_distance(s: &[f64; 2]) -> f64 {
    let dx = (s[0] - 0.5).abs().min(1.0 - (s[0] - 0.5).abs());
    let dy = (s[1] - 0.5).abs().min(1.0 - (s[1] - 0.5).abs());
    dx.hypot(dy)
}

/// Finds the steepest-needed logarithmic profile whose shells `U_1..U_K` are all
/// nonempty on the grid.
pub fn spike_profile(geometry: &Geometry, k_max: usize, outer_radius: f64) -> Result<SpikeProfile> {
    let h = geometry.spacing();
    let radii: Vec<f64> = geometry.sites().iter().map(periodic_distance).collect();
    for inner_factor in [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0] {
        let r_in = inner_factor * h;
        if r_in >= outer_radius {
            break;
        }
        let kappa = k_max as f64 / (outer_radius / r_in).ln();
        let values: Vec<f64> = radii
            .iter()
            .map(|r| 1.0 + kappa * (outer_radius / r.max(0.5 * h)).ln().max(0.0))
            .collect();
        let mut shells = vec![Vec::new(); k_max];
        let mut outer = Vec::new();
        for (i, a) in values.iter().enumerate() {
            if *a <= 1.0 {
                outer.push(i);
                continue;
            }
            // k < a ≤ k + 1
            let k = (a - 1.0).ceil() as usize;
            if (1..=k_max).contains(&k) {
                shells[k - 1].push(i);
            }
        }
        if !outer.is_empty() && shells.iter().all(|s| !s.is_empty()) {
            return Ok(SpikeProfile {
                kappa,
                inner_factor,
                values,
                shells,
                outer,
            });
        }
    }
    Err(Error::Schedule(format!(
        "no logarithmic profile has nonempty shells up to K = {k_max} at resolution {}; lower K or refine",
        geometry.resolution()
    )))
}

/// `ζ(s)` for `s > 1` by Euler–Maclaurin.
pub fn zeta(s: f64) -> f64 {
    if s == 2.0 {
        return PI * PI / 6.0;
    }
    let m = 1000.0_f64;
    let head = compensated_sum((1..1000).map(|k| (k as f64).powf(-s)));
    head + m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s) + s * m.powf(-s - 1.0) / 12.0
}

/// `f_K` on the shells plus the remaining mass on `{a ≤ 1}`, blended with a
/// uniform background.
pub fn spike_density(geometry: &Geometry, profile: &SpikeProfile, k: usize, s: f64, background: f64) -> Vec<f64> {
    let v = geometry.volume();
    let w = geometry.weights();
    let z = zeta(s);
    let mass = |idx: &[usize]| compensated_sum(idx.iter().map(|&i| w[i]));
    let mut f = vec![0.0; geometry.len()];
    let mut placed = 0.0;
    for (j, shell) in profile.shells.iter().take(k).enumerate() {
        let c = v * ((j + 1) as f64).powf(-s) / z;
        placed += c;
        let height = c / mass(shell);
        shell.iter().for_each(|&i| f[i] = height);
    }
    let rest = (v - placed).max(0.0) / mass(&profile.outer);
    profile.outer.iter().for_each(|&i| f[i] = rest);
    f.iter_mut().for_each(|x| *x = (1.0 - background) * *x + background);
    // absorb rounding so the mean is exactly one
    let m = geometry.mean(&f);
    f.iter_mut().for_each(|x| *x /= m);
    f
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpikeReport {
    pub config: SpikeConfig,
    pub kappa: f64,
    pub inner_factor: f64,
    pub ks: Vec<usize>,
    /// `Σ_{k≤K} k ∫_{U_k} ρ_{v_K} ω`
    pub witness: Vec<f64>,
    /// `(6V/π²) H_K`
    pub harmonic_target: Vec<f64>,
    /// `∫ |u|^{p′} ρ_{v_K} ω`
    pub full_moment: Vec<f64>,
    /// `∫ |ρ_{v_K} - ρ_{v_{K+1}}| ω`
    pub consecutive_l1: Vec<f64>,
    /// `2 (6V/π²)/(K+1)²`
    pub l1_target: Vec<f64>,
    /// `mabuchi_cauchy_stat(v_K, v_{K+1}, p′)`
    pub consecutive_mabuchi: Vec<f64>,
    /// log-log slope of the consecutive Mabuchi statistic against `K`
    pub mabuchi_trend_exponent: Option<f64>,
    #[serde(skip)]
    pub experiment: Option<SequenceExperiment>,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

impl SpikeReport {
    pub fn max_witness_error(&self) -> f64 {
        self.witness
            .iter()
            .zip(&self.harmonic_target)
            .map(|(a, b)| rel(*a, *b))
            .fold(0.0, f64::max)
    }

    pub fn max_l1_error(&self) -> f64 {
        self.consecutive_l1
            .iter()
            .zip(&self.l1_target)
            .map(|(a, b)| rel(*a, *b))
            .fold(0.0, f64::max)
    }

    pub fn verdicts(&self) -> VerdictTable {
        let mut t = VerdictTable::new("spike");
        let harmonic = self.config.coefficient_exponent == 2.0;
        if harmonic {
            let e = self.max_witness_error();
            t.check("witness_matches_harmonic_numbers", e < 0.05, Some(e), "max relative error against (6V/π²)H_K");
            let e = self.max_l1_error();
            t.check("consecutive_l1_follows_tail", e < 0.10, Some(e), "max relative error against 2(6V/π²)/(K+1)²");
        }
        let monotone = self.witness.windows(2).all(|w| w[1] > w[0]);
        t.check("witness_increasing", monotone, self.witness.last().copied(), "witness increases with K");
        let dominated = self.full_moment.iter().zip(&self.witness).all(|(m, w)| *m >= *w * (1.0 - 1e-12));
        t.check("moment_dominates_witness", dominated, None, "∫|u|^{p′}ρ ≥ witness");
        if let Some(e) = self.mabuchi_trend_exponent {
            t.record("mabuchi_trend_exponent", e);
        }
        t.record("kappa", self.kappa);
        t
    }
}

/// Builds the family `K = 1..=k_max` on the torus and its statistics.
pub fn spike_density_family(config: SpikeConfig) -> Result<SpikeReport> {
    if !(config.p_prime >= 1.0) {
        return Err(Error::InvalidExponent(format!("p′ = {} < 1", config.p_prime)));
    }
    if config.k_max == 0 {
        return Err(Error::Schedule("truncation level must be at least 1".into()));
    }
    if !(config.coefficient_exponent > 1.0) {
        return Err(Error::Schedule("shell coefficients must be summable (exponent > 1)".into()));
    }
    if !(0.0..1.0).contains(&config.background) || config.background == 0.0 {
        return Err(Error::Schedule("background fraction must lie in (0, 1)".into()));
    }
    let g: Arc<Geometry> = make_torus_geometry(config.resolution)?;
    let profile = spike_profile(&g, config.k_max, config.outer_radius)?;
    let s = config.coefficient_exponent;
    let ks: Vec<usize> = (1..=config.k_max).collect();
    let solved = crate::par::map_indexed(ks.len(), |i| {
        let f = spike_density(&g, &profile, ks[i], s, config.background);
        calabi_yau_inverse(&f, &g)
    })
    .into_iter()
    .collect::<Result<Vec<Potential>>>()?;

    let w = g.weights();
    let v = g.volume();
    let mut witness = Vec::new();
    let mut harmonic_target = Vec::new();
    let mut full_moment = Vec::new();
    let mut harmonic = 0.0;
    for (i, u) in solved.iter().enumerate() {
        let rho = u.density_values();
        let k = ks[i];
        harmonic += 1.0 / k as f64;
        witness.push(compensated_sum(profile.shells.iter().take(k).enumerate().flat_map(|(j, shell)| {
            shell.iter().map(move |&x| (j + 1) as f64 * w[x] * rho[x])
        })));
        harmonic_target.push(6.0 * v / (PI * PI) * harmonic);
        full_moment.push(compensated_sum(
            profile.values.iter().zip(rho).zip(w).map(|((a, r), w)| w * a * r),
        ));
    }
    let mut stats = Vec::new();
    let mut consecutive_l1 = Vec::new();
    let mut l1_target = Vec::new();
    let mut consecutive_mabuchi = Vec::new();
    for i in 0..solved.len().saturating_sub(1) {
        let l1 = calabi_cauchy_stat(&solved[i], &solved[i + 1], 1.0)?;
        let m = mabuchi_cauchy_stat(&solved[i], &solved[i + 1], config.p_prime)?;
        let k1 = (ks[i] + 1) as f64;
        consecutive_l1.push(l1);
        l1_target.push(2.0 * 6.0 * v / (PI * PI) / (k1 * k1));
        consecutive_mabuchi.push(m);
        push_stat(&mut stats, ks[i], ks[i + 1], "calabi_q1", l1);
        push_stat(&mut stats, ks[i], ks[i + 1], "mabuchi", m);
    }
    for (i, (wt, fm)) in witness.iter().zip(&full_moment).enumerate() {
        push_stat(&mut stats, ks[i], ks[i], "witness", *wt);
        push_stat(&mut stats, ks[i], ks[i], "moment", *fm);
    }
    let trend: Vec<(f64, f64)> = ks.iter().zip(&consecutive_mabuchi).map(|(k, m)| (*k as f64, *m)).collect();
    let mabuchi_trend_exponent = log_log_slope(&trend[trend.len() / 2..]);
    let experiment = SequenceExperiment {
        name: "spike".into(),
        params: serde_json::json!({
            "config": config,
            "kappa": profile.kappa,
            "inner_factor": profile.inner_factor,
            "profile": "1 + kappa * max(0, ln(R0 / max(r, h/2)))",
        }),
        sequence: solved,
        stats,
    };
    Ok(SpikeReport {
        config,
        kappa: profile.kappa,
        inner_factor: profile.inner_factor,
        ks,
        witness,
        harmonic_target,
        full_moment,
        consecutive_l1,
        l1_target,
        consecutive_mabuchi,
        mabuchi_trend_exponent,
        experiment: Some(experiment),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-15);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-12);
        assert!((zeta(3.0) - 1.202_056_903_159_594).abs() < 1e-12);
    }

    #[test]
    fn single_shell_family_is_defined() {
        let r = spike_density_family(SpikeConfig {
            resolution: 64,
            k_max: 1,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(r.witness.len(), 1);
        assert!(r.consecutive_l1.is_empty());
        assert!((r.witness[0] / r.harmonic_target[0] - 1.0).abs() < 0.01);
    }

    #[test]
    fn density_has_unit_mean_and_shell_masses() {
        let g = make_torus_geometry(128).unwrap();
        let p = spike_profile(&g, 16, 0.5).unwrap();
        let f = spike_density(&g, &p, 16, 2.0, 1e-3);
        assert!((g.mean(&f) - 1.0).abs() < 1e-13);
        assert!(f.iter().all(|x| *x > 0.0));
        let m3: f64 = p.shells[2].iter().map(|&i| g.weights()[i] * f[i]).sum();
        let bg: f64 = p.shells[2].iter().map(|&i| g.weights()[i]).sum::<f64>() * 1e-3;
        assert!((m3 - (0.999 * 6.0 / (PI * PI * 9.0) + bg)).abs() < 1e-12);
    }

    #[test]
    fn too_fine_truncation_is_a_schedule_error() {
        let g = make_torus_geometry(16).unwrap();
        assert!(matches!(spike_profile(&g, 200, 0.5), Err(Error::Schedule(_))));
    }

    #[test]
    fn harmonic_family_at_moderate_resolution() {
        let r = spike_density_family(SpikeConfig {
            resolution: 128,
            k_max: 24,
            ..Default::default()
        })
        .unwrap();
        let t = r.verdicts();
        assert!(t.passed(), "{:?}", t.failures());
        // doubling K adds about (6V/π²) log 2
        let d = r.witness[23] - r.witness[11];
        assert!((d / (6.0 / (PI * PI) * 2f64.ln()) - 1.0).abs() < 0.05, "{d}");
    }
}
