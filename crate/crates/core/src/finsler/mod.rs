//! The `L^{p,q}`-Calabi and `L^p`-Mabuchi Finsler structures on normalized
//! potentials, the embedding `F(u) = (p/q) ρ_u^{q/p}` onto the radius-`p/q`
//! octant of the `L^{p/q}`-sphere, and the Cauchy statistics characterizing
//! convergence in each path-length metric.

use serde::{Deserialize, Serialize};

use crate::backend::{Geometry, Potential};
use crate::error::{Error, Result};
use crate::lpq_sphere::{self, DiscreteCurve, SphereFunction};
use crate::numeric::compensated_sum;

mod diagnostics;
mod entropy;

pub use diagnostics::{
    equivalence_diagnostics, write_pair_csv, DiagnosticRow, EquivalenceDiagnostics, MetricReport, PairStat, STAT_NAMES,
};
pub use entropy::{
    calibrate_pinsker_constant, density_entropy, entropy, pinsker_gap, smoothing_sequence, smoothing_statistics,
    two_cell_pinsker, PinskerGap, PINSKER_KAPPA_PER_VOLUME,
};

/// Validates `1 ≤ q ≤ p` (`p = ∞` allowed).
pub fn check_exponents(p: f64, q: f64) -> Result<()> {
    if q.is_nan() || p.is_nan() || q < 1.0 || q > p || q.is_infinite() {
        return Err(Error::ExponentOrder { p, q });
    }
    Ok(())
}

/// `((1/V) Σ wᵢ |vᵢ|^p cᵢ)^{1/p}`, or `max |vᵢ|` for `p = ∞`.
fn weighted_norm(geometry: &Geometry, values: &[f64], weights: impl Fn(usize) -> f64, p: f64) -> f64 {
    if p.is_infinite() {
        return values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let terms = values
        .iter()
        .zip(geometry.weights())
        .enumerate()
        .map(|(i, (v, w))| w * v.abs().powf(p) * weights(i));
    (compensated_sum(terms) / geometry.volume()).max(0.0).powf(1.0 / p)
}

/// `‖β‖^C_{p,q,u} = ((1/V)∫ |Δ_{ω_u}β|^p ρ_u^q ω)^{1/p}`.
pub fn calabi_norm(u: &Potential, beta: &[f64], p: f64, q: f64) -> Result<f64> {
    check_exponents(p, q)?;
    let g = u.geometry();
    g.check_len(beta)?;
    let rho = u.density_values();
    let lap: Vec<f64> = g.laplace(beta).iter().zip(rho).map(|(l, r)| l / r).collect();
    Ok(weighted_norm(g, &lap, |i| rho[i].powf(q), p))
}

/// `‖φ‖_{p,u} = ((1/V)∫ |φ - φ̄|^p ω_u)^{1/p}` with `φ̄` the `ω_u`-average.
pub fn mabuchi_norm(u: &Potential, phi: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(format!("p = {p} < 1")));
    }
    let g = u.geometry();
    g.check_len(phi)?;
    let rho = u.density_values();
    let bar = compensated_sum(phi.iter().zip(rho).zip(g.weights()).map(|((f, r), w)| f * r * w)) / g.volume();
    let centered: Vec<f64> = phi.iter().map(|f| f - bar).collect();
    Ok(weighted_norm(g, &centered, |i| rho[i], p))
}

/// `F(u) = (p/q) ρ_u^{q/p}`, a point of `𝕊⁺_{L^{p/q}}(ω, p/q)`.
pub fn embed_f(u: &Potential, p: f64, q: f64) -> Result<SphereFunction> {
    check_exponents(p, q)?;
    if p.is_infinite() {
        return Err(Error::InvalidExponent("the embedding needs p < ∞".into()));
    }
    let s = p / q;
    let values = u.density_values().iter().map(|r| s * r.powf(q / p)).collect();
    SphereFunction::new(values, s, s, u.geometry().measure())
}

/// A sampled curve of potentials on a common geometry.
#[derive(Debug, Clone)]
pub struct PotentialCurve {
    samples: Vec<Potential>,
    params: Vec<f64>,
}

impl PotentialCurve {
    pub fn new(samples: Vec<Potential>, params: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::DegenerateCurve(format!("{} samples", samples.len())));
        }
        if samples.len() != params.len() {
            return Err(Error::ShapeMismatch {
                expected: samples.len(),
                got: params.len(),
            });
        }
        if params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateCurve("parameters not strictly increasing".into()));
        }
        for s in &samples[1..] {
            samples[0].same_geometry(s)?;
        }
        Ok(PotentialCurve { samples, params })
    }

    /// Samples `t ↦ u_t` at `m` uniform parameters in `[0, 1]`.
    pub fn sample<F>(m: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> Result<Potential>,
    {
        if m < 2 {
            return Err(Error::DegenerateCurve(format!("m = {m} < 2 samples")));
        }
        let params = DiscreteCurve::uniform_params(m);
        let samples = params.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        Self::new(samples, params)
    }

    pub fn samples(&self) -> &[Potential] {
        &self.samples
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn reversed(&self) -> Self {
        PotentialCurve {
            samples: self.samples.iter().rev().cloned().collect(),
            params: self.params.iter().rev().map(|t| 1.0 - t).collect(),
        }
    }

    /// Image under `F` as a discrete curve in the ambient `L^p` space.
    pub fn embedded(&self, p: f64, q: f64) -> Result<DiscreteCurve> {
        let samples = self
            .samples
            .iter()
            .map(|u| embed_f(u, p, q).map(SphereFunction::into_values))
            .collect::<Result<Vec<_>>>()?;
        DiscreteCurve::new(samples, self.params.clone())
    }

    fn segments(&self) -> impl Iterator<Item = Result<(Potential, Vec<f64>, f64)>> + '_ {
        self.samples.windows(2).zip(self.params.windows(2)).map(|(u, t)| {
            let dt = t[1] - t[0];
            let g = u[0].geometry().clone();
            let mid: Vec<f64> = u[0].values().iter().zip(u[1].values()).map(|(a, b)| 0.5 * (a + b)).collect();
            let vel: Vec<f64> = u[0].values().iter().zip(u[1].values()).map(|(a, b)| (b - a) / dt).collect();
            Ok((Potential::new(g, mid)?, vel, dt))
        })
    }
}

/// Midpoint-rule `L^{p,q}`-Calabi length.
pub fn calabi_length(c: &PotentialCurve, p: f64, q: f64) -> Result<f64> {
    check_exponents(p, q)?;
    let mut terms = Vec::with_capacity(c.samples.len());
    for seg in c.segments() {
        let (mid, vel, dt) = seg?;
        terms.push(calabi_norm(&mid, &vel, p, q)? * dt);
    }
    Ok(compensated_sum(terms))
}

/// Midpoint-rule `L^p`-Mabuchi length.
pub fn mabuchi_length(c: &PotentialCurve, p: f64) -> Result<f64> {
    let mut terms = Vec::with_capacity(c.samples.len());
    for seg in c.segments() {
        let (mid, vel, dt) = seg?;
        terms.push(mabuchi_norm(&mid, &vel, p)? * dt);
    }
    Ok(compensated_sum(terms))
}

/// Bounds on the Calabi path-length distance between two potentials.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DistanceBracket {
    /// chordal distance between the `F`-images
    pub lower: f64,
    /// length of the normalized segment between the `F`-images
    pub upper: f64,
    /// polygonal length of the normalized segment at the requested sample count
    pub polygon: f64,
    /// great-circle distance `2 arccos((1/V)∫√(ρ₀ρ₁) ω)`, available for `p = 2, q = 1`
    pub closed_form: Option<f64>,
}

impl DistanceBracket {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Great-circle distance for `p = 2, q = 1`.
pub fn calabi_closed_form_21(u0: &Potential, u1: &Potential) -> Result<f64> {
    u0.same_geometry(u1)?;
    let g = u0.geometry();
    let prod: Vec<f64> = u0
        .density_values()
        .iter()
        .zip(u1.density_values())
        .map(|(a, b)| (a * b).sqrt())
        .collect();
    let c = g.mean(&prod).clamp(-1.0, 1.0);
    // 2·arccos(c) computed through atan2 to stay accurate near c = 1
    let s = (1.0 - c * c).max(0.0).sqrt();
    Ok(2.0 * s.atan2(c))
}

/// `lower = ‖F(u0) - F(u1)‖_p ≤ d^C_{p,q}(u0, u1) ≤ upper`, with `upper` the exact
/// length of the normalized segment (Gauss–Legendre over `m` panels).
pub fn calabi_distance_bracket(u0: &Potential, u1: &Potential, p: f64, q: f64, m: usize) -> Result<DistanceBracket> {
    u0.same_geometry(u1)?;
    let f0 = embed_f(u0, p, q)?;
    let f1 = embed_f(u1, p, q)?;
    let mu = u0.geometry().measure();
    let lower = lpq_sphere::chord_distance(&f0, &f1, p, mu)?;
    let upper = lpq_sphere::segment_length_quadrature(&f0, &f1, p, mu, m.max(1))?;
    let polygon = lpq_sphere::curve_length(&lpq_sphere::normalized_segment_curve(&f0, &f1, mu, m.max(2))?, p, mu)?;
    let closed_form = if p == 2.0 && q == 1.0 {
        Some(calabi_closed_form_21(u0, u1)?)
    } else {
        None
    };
    Ok(DistanceBracket {
        lower,
        upper: upper.max(lower),
        polygon,
        closed_form,
    })
}

/// `∫ |ρ_j - ρ_k|^q ω`.
pub fn calabi_cauchy_stat(uj: &Potential, uk: &Potential, q: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::InvalidExponent(format!("q = {q} < 1")));
    }
    uj.same_geometry(uk)?;
    let g = uj.geometry();
    Ok(compensated_sum(
        uj.density_values()
            .iter()
            .zip(uk.density_values())
            .zip(g.weights())
            .map(|((a, b), w)| w * (a - b).abs().powf(q)),
    ))
}

/// `∫ |u_j - u_k|^p ω_{u_j} + ∫ |u_j - u_k|^p ω_{u_k}`.
pub fn mabuchi_cauchy_stat(uj: &Potential, uk: &Potential, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(format!("p = {p} < 1")));
    }
    uj.same_geometry(uk)?;
    let g = uj.geometry();
    Ok(compensated_sum(
        uj.values()
            .iter()
            .zip(uk.values())
            .zip(uj.density_values().iter().zip(uk.density_values()))
            .zip(g.weights())
            .map(|(((a, b), (ra, rb)), w)| w * (a - b).abs().powf(p) * (ra + rb)),
    ))
}

/// `‖u_j - u_k‖_∞`.
pub fn sup_distance(uj: &Potential, uk: &Potential) -> f64 {
    uj.values()
        .iter()
        .zip(uk.values())
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
}

/// `∫ |u_j - u| ω`.
pub fn l1_distance(uj: &Potential, u: &Potential) -> f64 {
    let g = uj.geometry();
    compensated_sum(
        uj.values()
            .iter()
            .zip(u.values())
            .zip(g.weights())
            .map(|((a, b), w)| w * (a - b).abs()),
    )
}
