//! Smoothed maxima of two crossing potentials. Their densities concentrate mass
//! along the level set `{v0 = v1}`, so the Mabuchi statistics vanish while the
//! Calabi `q = 1` statistic does not.

use serde::{Deserialize, Serialize};

use super::{push_stat, SequenceExperiment, VerdictTable};
use crate::backend::Potential;
use crate::error::{Error, Result};
use crate::finsler::{calabi_cauchy_stat, entropy, mabuchi_cauchy_stat};
use crate::numeric::{compensated_sum, max_abs};

/// Level-set sites whose gradient falls below this fraction of `max |∇(v0 - v1)|`
/// make the construction unsuitable.
const MIN_GRADIENT_FRACTION: f64 = 0.05;
/// Sites with `|d| < ZERO_FRACTION · max |d|` count as lying on the level set.
const ZERO_FRACTION: f64 = 1e-3;
/// Collar half-width for the coarea estimate of the level-set charge, in units of `max |d|`.
const CHARGE_BAND: f64 = 0.15;

/// `m_ε(a, b) = (a + b + √((a - b)² + ε²))/2`, renormalized; `ε = 0` is the exact maximum.
///
/// `m_ε` is convex and nondecreasing with `∂_a m + ∂_b m = 1`, and the stencil has
/// positive weights, so `ρ_{m_ε} ≥ θρ_{v0} + (1-θ)ρ_{v1} > 0` site by site.
pub fn smooth_max_potential(v0: &Potential, v1: &Potential, eps: f64) -> Result<Potential> {
    v0.same_geometry(v1)?;
    if !(eps >= 0.0) {
        return Err(Error::Schedule(format!("smoothing parameter {eps} must be nonnegative")));
    }
    let v = v0
        .values()
        .iter()
        .zip(v1.values())
        .map(|(a, b)| 0.5 * (a + b + ((a - b) * (a - b) + eps * eps).sqrt()))
        .collect();
    Potential::normalized(v0.geometry().clone(), v)
}

fn difference(v0: &Potential, v1: &Potential) -> Vec<f64> {
    v0.values().iter().zip(v1.values()).map(|(a, b)| a - b).collect()
}

/// `min |∇d| / max |∇d|` over the discrete zero level set of `d = v0 - v1`
/// (sites with a sign change to a neighbour, or `|d|` negligible). Identical
/// inputs return 1.
pub fn transversality(v0: &Potential, v1: &Potential) -> Result<f64> {
    v0.same_geometry(v1)?;
    let g = v0.geometry();
    let d = difference(v0, v1);
    let dmax = max_abs(&d);
    if dmax == 0.0 {
        return Ok(1.0);
    }
    let grad = g.gradient_norm(&d);
    let gmax = max_abs(&grad);
    let mut ratio = f64::INFINITY;
    let mut found = false;
    for i in 0..g.len() {
        let on_level = d[i].abs() < ZERO_FRACTION * dmax || g.neighbors(i).iter().any(|&j| d[i] * d[j] < 0.0);
        if on_level {
            found = true;
            ratio = ratio.min(grad[i] / gmax);
        }
    }
    if !found {
        return Err(Error::ConstructionUnsuitable("v0 - v1 does not change sign".into()));
    }
    if ratio < MIN_GRADIENT_FRACTION {
        return Err(Error::ConstructionUnsuitable(format!(
            "level set of v0 - v1 is tangential: |∇d| drops to {ratio:.3e} of its maximum"
        )));
    }
    Ok(ratio)
}

/// Mass `½∫_{d=0} |∇d| dℓ` that the exact maximum places on the level set,
/// estimated through the coarea formula on a band `|d| < η`.
pub fn level_set_charge(v0: &Potential, v1: &Potential) -> f64 {
    let g = v0.geometry();
    let d = difference(v0, v1);
    let eta = CHARGE_BAND * max_abs(&d);
    if eta == 0.0 {
        return 0.0;
    }
    let grad = g.gradient_norm(&d);
    let band = compensated_sum(
        d.iter()
            .zip(&grad)
            .zip(g.weights())
            .filter(|((x, _), _)| x.abs() < eta)
            .map(|((_, gr), w)| w * gr * gr),
    );
    0.5 * band / (2.0 * eta)
}

/// `∫_{|d| ≤ width} ρ_u ω`.
pub fn collar_mass(u: &Potential, d: &[f64], width: f64) -> f64 {
    let g = u.geometry();
    compensated_sum(
        d.iter()
            .zip(u.density_values())
            .zip(g.weights())
            .filter(|((x, _), _)| x.abs() <= width)
            .map(|((_, r), w)| w * r),
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxSmoothingReport {
    pub resolution: usize,
    pub eps: Vec<f64>,
    /// `mabuchi_cauchy_stat(u_k, u_{k+1}, 1)`
    pub consecutive_mabuchi: Vec<f64>,
    /// `calabi_cauchy_stat(u_k, u_{k+1}, 1)`
    pub consecutive_calabi: Vec<f64>,
    /// `calabi_cauchy_stat(u_k, u_last, 1)`
    pub calabi_to_last: Vec<f64>,
    pub collar_masses: Vec<f64>,
    pub level_set_charge: f64,
    /// `calabi_cauchy_stat(u_first, u_last, 1)`
    pub delta: f64,
    pub entropies: Vec<f64>,
    pub transversality: f64,
    #[serde(skip)]
    pub experiment: Option<SequenceExperiment>,
}

impl MaxSmoothingReport {
    pub fn verdicts(&self) -> VerdictTable {
        let mut t = VerdictTable::new("max-smoothing");
        let m = &self.consecutive_mabuchi;
        let floor = 1e-14 * m.first().copied().unwrap_or(0.0);
        let monotone = m.windows(2).all(|w| w[1] < w[0] || w[0] <= floor);
        t.check("mabuchi_consecutive_monotone", monotone, m.last().copied(), "consecutive Mabuchi statistics decrease along the schedule");
        let late = m.last().copied().unwrap_or(f64::INFINITY);
        t.check("mabuchi_late_below_1e-4", late < 1e-4, Some(late), "late consecutive Mabuchi statistic");
        t.check(
            "calabi_gap_positive",
            self.delta > 0.5 * self.level_set_charge && self.delta > 0.0,
            Some(self.delta),
            format!("first-to-last Calabi statistic against level-set charge {:.4e}", self.level_set_charge),
        );
        let min_collar = self.collar_masses.iter().copied().fold(f64::INFINITY, f64::min);
        t.check(
            "collar_mass_bounded_below",
            min_collar >= 0.5 * self.level_set_charge,
            Some(min_collar),
            "density mass in the shrinking collar stays above half the level-set charge",
        );
        t.record("delta", self.delta);
        t.record("level_set_charge", self.level_set_charge);
        t.record("transversality", self.transversality);
        if let (Some(a), Some(b)) = (self.entropies.first(), self.entropies.last()) {
            t.record("entropy_drift", b - a);
        }
        t
    }
}

/// Builds `u_ε = m_ε(v0, v1)` along a strictly decreasing schedule and its statistics.
pub fn max_smoothing_family(v0: &Potential, v1: &Potential, eps_schedule: &[f64]) -> Result<MaxSmoothingReport> {
    v0.same_geometry(v1)?;
    if eps_schedule.len() < 2 || eps_schedule.windows(2).any(|w| !(w[1] < w[0])) || eps_schedule.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Schedule("ε schedule must be positive and strictly decreasing with at least two entries".into()));
    }
    let transversality = transversality(v0, v1)?;
    let g = v0.geometry();
    let d = difference(v0, v1);
    let gmax = max_abs(&g.gradient_norm(&d));
    let sequence = crate::par::map_indexed(eps_schedule.len(), |k| smooth_max_potential(v0, v1, eps_schedule[k]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let last = sequence.len() - 1;
    let mut stats = Vec::new();
    let mut consecutive_mabuchi = Vec::with_capacity(last);
    let mut consecutive_calabi = Vec::with_capacity(last);
    for k in 0..last {
        let m = mabuchi_cauchy_stat(&sequence[k], &sequence[k + 1], 1.0)?;
        let c = calabi_cauchy_stat(&sequence[k], &sequence[k + 1], 1.0)?;
        push_stat(&mut stats, k, k + 1, "mabuchi_p1", m);
        push_stat(&mut stats, k, k + 1, "calabi_q1", c);
        consecutive_mabuchi.push(m);
        consecutive_calabi.push(c);
    }
    let calabi_to_last = sequence
        .iter()
        .map(|u| calabi_cauchy_stat(u, &sequence[last], 1.0))
        .collect::<Result<Vec<_>>>()?;
    for (k, v) in calabi_to_last.iter().enumerate() {
        push_stat(&mut stats, k, last, "calabi_q1_to_last", *v);
    }
    let collar_masses: Vec<f64> = sequence
        .iter()
        .zip(eps_schedule)
        .map(|(u, e)| collar_mass(u, &d, (4.0 * e).max(2.0 * g.spacing() * gmax)))
        .collect();
    let entropies: Vec<f64> = sequence.iter().map(entropy).collect();
    for (k, (c, e)) in collar_masses.iter().zip(&entropies).enumerate() {
        push_stat(&mut stats, k, k, "collar_mass", *c);
        push_stat(&mut stats, k, k, "entropy", *e);
    }
    let delta = calabi_to_last[0];
    let experiment = SequenceExperiment {
        name: "max-smoothing".into(),
        params: serde_json::json!({
            "backend": g.kind().name(),
            "resolution": g.resolution(),
            "eps": eps_schedule,
        }),
        sequence,
        stats,
    };
    Ok(MaxSmoothingReport {
        resolution: g.resolution(),
        eps: eps_schedule.to_vec(),
        consecutive_mabuchi,
        consecutive_calabi,
        calabi_to_last,
        collar_masses,
        level_set_charge: level_set_charge(v0, v1),
        delta,
        entropies,
        transversality,
        experiment: Some(experiment),
    })
}
