//! Flat `L^p` geometry over a finite measure space and the positive octant of
//! the `L^{p/q}`-sphere sitting inside it.
//!
//! Every integral here is a normalized weighted sum `(1/μ(X)) Σ wᵢ fᵢ`. Points
//! of the octant are positive atom functions `f` with `‖f‖_{p/q} = r`, and the
//! octant inherits the flat `L^p` Finsler length from the ambient space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompositeRule};

/// Relative floor for octant membership: `fᵢ ≥ 1e-12 · max|f|`.
pub const OCTANT_FLOOR: f64 = 1e-12;
/// Relative tolerance on the sphere radius constraint.
pub const RADIUS_TOL: f64 = 1e-10;

/// Finite atom set with positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpace {
    weights: Vec<f64>,
    total: f64,
}

impl MeasureSpace {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("measure space needs at least one atom".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::Domain(format!("weight {w} at atom {i} is not positive")));
        }
        let total = compensated_sum(weights.iter().copied());
        Ok(MeasureSpace { weights, total })
    }

    /// `n` atoms of equal weight summing to `total`.
    pub fn uniform(n: usize, total: f64) -> Result<Self> {
        Self::new(vec![total / n as f64; n])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `Σ wᵢ fᵢ`.
    pub fn integral(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        compensated_sum(self.weights.iter().zip(f).map(|(w, v)| w * v))
    }

    /// `(1/μ(X)) Σ wᵢ fᵢ`.
    pub fn mean(&self, f: &[f64]) -> f64 {
        self.integral(f) / self.total
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(format!("p = {p} < 1")));
    }
    Ok(())
}

/// Normalized `L^p` norm `((1/μ(X)) Σ wᵢ|fᵢ|^p)^{1/p}`; `p = ∞` gives `max|fᵢ|`.
pub fn lp_norm(f: &[f64], p: f64, mu: &MeasureSpace) -> Result<f64> {
    check_exponent(p)?;
    mu.check_len(f)?;
    Ok(lp_norm_unchecked(f, p, mu))
}

pub(crate) fn lp_norm_unchecked(f: &[f64], p: f64, mu: &MeasureSpace) -> f64 {
    if p.is_infinite() {
        return f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    }
    let s = if p == 1.0 {
        mu.mean(&f.iter().map(|v| v.abs()).collect::<Vec<_>>())
    } else if p == 2.0 {
        mu.mean(&f.iter().map(|v| v * v).collect::<Vec<_>>())
    } else {
        mu.mean(&f.iter().map(|v| v.abs().powf(p)).collect::<Vec<_>>())
    };
    s.max(0.0).powf(1.0 / p)
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// A point of the octant `𝕊⁺_{L^{s}}(μ, r)` with `s = p/q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereFunction {
    values: Vec<f64>,
    exponent_ratio: f64,
    radius: f64,
}

impl SphereFunction {
    /// Validates positivity and the radius constraint.
    pub fn new(values: Vec<f64>, exponent_ratio: f64, radius: f64, mu: &MeasureSpace) -> Result<Self> {
        check_exponent(exponent_ratio)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("radius {radius} must be positive")));
        }
        mu.check_len(&values)?;
        check_octant(&values)?;
        let norm = lp_norm_unchecked(&values, exponent_ratio, mu);
        if ((norm - radius) / radius).abs() > RADIUS_TOL {
            return Err(Error::Domain(format!(
                "L^{exponent_ratio} norm {norm} differs from radius {radius}"
            )));
        }
        Ok(SphereFunction {
            values,
            exponent_ratio,
            radius,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exponent_ratio(&self) -> f64 {
        self.exponent_ratio
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

fn check_octant(values: &[f64]) -> Result<()> {
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for (index, &value) in values.iter().enumerate() {
        if !(value > 0.0) || value < OCTANT_FLOOR * max {
            return Err(Error::OctantViolation { index, value });
        }
    }
    Ok(())
}

/// Radial projection `f ↦ r f / ‖f‖_{p/q}` onto the octant.
pub fn sphere_project(f: &[f64], p: f64, q: f64, r: f64, mu: &MeasureSpace) -> Result<SphereFunction> {
    check_exponent(p)?;
    check_exponent(q)?;
    mu.check_len(f)?;
    check_octant(f)?;
    let s = p / q;
    let norm = lp_norm_unchecked(f, s, mu);
    let values: Vec<f64> = f.iter().map(|v| r * v / norm).collect();
    SphereFunction::new(values, s, r, mu)
}

/// Flat `L^p` distance between two octant points.
pub fn chord_distance(f0: &SphereFunction, f1: &SphereFunction, p: f64, mu: &MeasureSpace) -> Result<f64> {
    if f0.values.len() != f1.values.len() {
        return Err(Error::ShapeMismatch {
            expected: f0.values.len(),
            got: f1.values.len(),
        });
    }
    lp_norm(&diff(&f0.values, &f1.values), p, mu)
}

/// A sampled curve `t ↦ f_t` with strictly increasing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    samples: Vec<Vec<f64>>,
    params: Vec<f64>,
}

impl DiscreteCurve {
    pub fn new(samples: Vec<Vec<f64>>, params: Vec<f64>) -> Result<Self> {
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
        let n = samples[0].len();
        if let Some(s) = samples.iter().find(|s| s.len() != n) {
            return Err(Error::ShapeMismatch {
                expected: n,
                got: s.len(),
            });
        }
        Ok(DiscreteCurve { samples, params })
    }

    /// Uniform parameters `tᵢ = i/(m-1)` including both endpoints.
    pub fn uniform_params(m: usize) -> Vec<f64> {
        (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn reversed(&self) -> Self {
        let samples = self.samples.iter().rev().cloned().collect();
        let params = self.params.iter().rev().map(|t| 1.0 - t).collect();
        DiscreteCurve { samples, params }
    }
}

fn check_pair(f0: &SphereFunction, f1: &SphereFunction) -> Result<()> {
    if f0.values.len() != f1.values.len() {
        return Err(Error::ShapeMismatch {
            expected: f0.values.len(),
            got: f1.values.len(),
        });
    }
    if (f0.exponent_ratio - f1.exponent_ratio).abs() > 1e-14 || (f0.radius - f1.radius).abs() > 1e-12 * f0.radius {
        return Err(Error::Domain("endpoints lie on different spheres".into()));
    }
    Ok(())
}

/// The curve `α_t = r f_t / ‖f_t‖_{p/q}` with `f_t = f0 + t(f1 - f0)`, sampled at
/// `m` uniform parameters.
pub fn normalized_segment_curve(
    f0: &SphereFunction,
    f1: &SphereFunction,
    mu: &MeasureSpace,
    m: usize,
) -> Result<DiscreteCurve> {
    check_pair(f0, f1)?;
    if m < 2 {
        return Err(Error::DegenerateCurve(format!("m = {m} < 2 samples")));
    }
    let params = DiscreteCurve::uniform_params(m);
    let samples = params
        .iter()
        .map(|&t| segment_point(f0, f1, t, mu))
        .collect();
    DiscreteCurve::new(samples, params)
}

fn segment_point(f0: &SphereFunction, f1: &SphereFunction, t: f64, mu: &MeasureSpace) -> Vec<f64> {
    let ft: Vec<f64> = f0
        .values
        .iter()
        .zip(&f1.values)
        .map(|(a, b)| a + t * (b - a))
        .collect();
    let norm = lp_norm_unchecked(&ft, f0.exponent_ratio, mu);
    ft.into_iter().map(|v| f0.radius * v / norm).collect()
}

/// Polygonal `L^p` length `Σ ‖f_{i+1} - f_i‖_p`.
pub fn curve_length(c: &DiscreteCurve, p: f64, mu: &MeasureSpace) -> Result<f64> {
    check_exponent(p)?;
    mu.check_len(&c.samples[0])?;
    Ok(compensated_sum(
        c.samples
            .windows(2)
            .map(|w| lp_norm_unchecked(&diff(&w[1], &w[0]), p, mu)),
    ))
}

/// Richardson estimate `(4 L_{2h} - L_h)/3` of the continuum length of the
/// normalized segment from polygons with `m` and `2m - 1` samples.
pub fn segment_length_richardson(
    f0: &SphereFunction,
    f1: &SphereFunction,
    p: f64,
    mu: &MeasureSpace,
    m: usize,
) -> Result<f64> {
    let coarse = curve_length(&normalized_segment_curve(f0, f1, mu, m)?, p, mu)?;
    let fine = curve_length(&normalized_segment_curve(f0, f1, mu, 2 * m - 1)?, p, mu)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Pieces of the normalized segment at parameter `t`.
struct SegmentState {
    /// ‖f_t‖_{p/q}
    norm_s: f64,
    /// ‖f_t‖_p
    norm_p: f64,
    /// (1/μ(X)) ∫ |f1 - f0| f_t^{s-1}
    abs_moment: f64,
    /// ‖α̇_t‖_p
    speed: f64,
}

fn segment_state(f0: &SphereFunction, f1: &SphereFunction, p: f64, t: f64, mu: &MeasureSpace) -> SegmentState {
    let s = f0.exponent_ratio;
    let r = f0.radius;
    let delta = diff(&f1.values, &f0.values);
    let ft: Vec<f64> = f0.values.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
    let norm_s = lp_norm_unchecked(&ft, s, mu);
    let norm_p = lp_norm_unchecked(&ft, p, mu);
    let signed_moment = mu.mean(
        &delta
            .iter()
            .zip(&ft)
            .map(|(d, f)| d * f.powf(s - 1.0))
            .collect::<Vec<_>>(),
    );
    let abs_moment = mu.mean(
        &delta
            .iter()
            .zip(&ft)
            .map(|(d, f)| d.abs() * f.powf(s - 1.0))
            .collect::<Vec<_>>(),
    );
    let coef = r * signed_moment / norm_s.powf(s + 1.0);
    let velocity: Vec<f64> = delta
        .iter()
        .zip(&ft)
        .map(|(d, f)| r * d / norm_s - coef * f)
        .collect();
    SegmentState {
        norm_s,
        norm_p,
        abs_moment,
        speed: lp_norm_unchecked(&velocity, p, mu),
    }
}

/// Length `∫₀¹ ‖α̇_t‖_p dt` of the normalized segment using the exact velocity
/// and composite Gauss–Legendre quadrature in `t`.
pub fn segment_length_quadrature(
    f0: &SphereFunction,
    f1: &SphereFunction,
    p: f64,
    mu: &MeasureSpace,
    panels: usize,
) -> Result<f64> {
    check_pair(f0, f1)?;
    check_exponent(p)?;
    let rule = CompositeRule::new(0.0, 1.0, panels.max(1), 8);
    let speeds: Vec<f64> = rule
        .nodes
        .iter()
        .map(|&t| segment_state(f0, f1, p, t, mu).speed)
        .collect();
    Ok(rule.integrate(&speeds))
}

/// Both sides of every step in the chord/round comparison estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub chord: f64,
    /// polygonal length of the normalized segment at the report's sample count
    pub segment_polygon_length: f64,
    /// `∫‖α̇‖_p`, the length of the normalized segment
    pub segment_length: f64,
    /// Integrated right-hand sides of the five estimate lines; `lines[0]` is the segment length.
    pub lines: [f64; 6],
    /// `‖f - f0‖_p`, `‖f - f1‖_p`
    pub basepoint_distances: [f64; 2],
    /// norm comparison constant `C'` (absorbs the radius)
    pub norm_constant: f64,
    /// final constant `C`
    pub constant: f64,
    /// `C (d(f,f0) + d(f,f1) + 1) ‖f1 - f0‖_p`
    pub final_bound: f64,
    /// `min_t ‖f_t‖_{p/q} / r`, expected ≥ 1/2
    pub min_norm_ratio: f64,
    /// largest pointwise excess of line k over line k+1, normalized by scale
    pub max_pointwise_violation: f64,
    /// every inequality of the chain held
    pub holds: bool,
    /// `segment_length / chord` when the chord is positive
    pub observed_ratio: Option<f64>,
}

/// Evaluates each line of the chord/round estimate for the normalized segment
/// between `f0` and `f1`, relative to basepoint `f`.
///
/// The norm comparison `‖g‖_{p/q} ≤ ‖g‖_p` has constant 1 under the normalized
/// measure, so `C' = r`. Basepoint distances enter through the chordal distance,
/// which bounds the round distance from below, so the final line is the
/// sharpest form of the bound.
pub fn comparison_bracket_check(
    f: &SphereFunction,
    f0: &SphereFunction,
    f1: &SphereFunction,
    p: f64,
    mu: &MeasureSpace,
) -> Result<ComparisonReport> {
    check_pair(f0, f1)?;
    check_pair(f, f0)?;
    check_exponent(p)?;
    let s = f0.exponent_ratio;
    let r = f0.radius;
    let delta = diff(&f1.values, &f0.values);
    let delta_p = lp_norm_unchecked(&delta, p, mu);
    let delta_s = lp_norm_unchecked(&delta, s, mu);
    let a = lp_norm_unchecked(&diff(&f.values, &f0.values), p, mu);
    let b = lp_norm_unchecked(&diff(&f.values, &f1.values), p, mu);
    let f_p = lp_norm_unchecked(&f.values, p, mu);
    let c_prime = r;
    let constant = (2.0 + 4.0 * c_prime * f_p / (r * r)).max(2.0 * c_prime / (r * r));
    let final_bound = constant * (a + b + 1.0) * delta_p;

    let rule = CompositeRule::new(0.0, 1.0, 16, 8);
    let mut integrands: Vec<Vec<f64>> = (0..6).map(|_| Vec::with_capacity(rule.nodes.len())).collect();
    let mut max_violation = 0.0_f64;
    let mut min_norm_ratio = f64::INFINITY;
    let slack = 1e-12;
    for &t in &rule.nodes {
        let st = segment_state(f0, f1, p, t, mu);
        let n = st.norm_s;
        min_norm_ratio = min_norm_ratio.min(n / r);
        let first = r * delta_p / n;
        let lin = (1.0 - t) * a + t * b + f_p;
        let vals = [
            st.speed,
            first + r * st.norm_p * st.abs_moment / n.powf(s + 1.0),
            first + r * st.norm_p * delta_s / (n * n),
            first + c_prime * delta_p * st.norm_p / (n * n),
            first + c_prime * delta_p * lin / (n * n),
            delta_p * (2.0 + c_prime * 4.0 / (r * r) * lin),
        ];
        for k in 0..5 {
            let scale = vals[k + 1].abs().max(1e-300);
            max_violation = max_violation.max((vals[k] - vals[k + 1]) / scale);
        }
        for (k, v) in vals.iter().enumerate() {
            integrands[k].push(*v);
        }
    }
    // the r/2 bound on a uniform grid too
    for i in 0..=200 {
        let t = i as f64 / 200.0;
        min_norm_ratio = min_norm_ratio.min(segment_state(f0, f1, p, t, mu).norm_s / r);
    }
    let mut lines = [0.0; 6];
    for k in 0..6 {
        lines[k] = rule.integrate(&integrands[k]);
    }
    let chord = delta_p;
    let segment_length = lines[0];
    let polygon = curve_length(&normalized_segment_curve(f0, f1, mu, 65)?, p, mu)?;
    let chain_ok = max_violation <= slack;
    let integrated_ok = lines.windows(2).all(|w| w[0] <= w[1] * (1.0 + slack) + 1e-300)
        && lines[5] <= final_bound * (1.0 + slack) + 1e-300;
    let chord_ok = chord <= polygon * (1.0 + 1e-12) + 1e-15 && polygon <= segment_length * (1.0 + 1e-9) + 1e-15;
    let holds = chain_ok && integrated_ok && chord_ok && min_norm_ratio >= 0.5 - 1e-12;
    Ok(ComparisonReport {
        chord,
        segment_polygon_length: polygon,
        segment_length,
        lines,
        basepoint_distances: [a, b],
        norm_constant: c_prime,
        constant,
        final_bound,
        min_norm_ratio,
        max_pointwise_violation: max_violation,
        holds,
        observed_ratio: (chord > 0.0).then(|| segment_length / chord),
    })
}

/// Per-index pair `(‖f_j - f‖_{L^q}, ‖f_j^{q/p} - f^{q/p}‖_{L^p})`.
pub fn vitali_equivalence_stat(
    sequence: &[Vec<f64>],
    f: &[f64],
    p: f64,
    q: f64,
    mu: &MeasureSpace,
) -> Result<Vec<(f64, f64)>> {
    check_exponent(p)?;
    check_exponent(q)?;
    mu.check_len(f)?;
    let neg = |v: &[f64]| v.iter().position(|x| *x < 0.0 || x.is_nan());
    if let Some(i) = neg(f) {
        return Err(Error::Domain(format!("negative value {} at atom {i}", f[i])));
    }
    let power = q / p;
    let f_pow: Vec<f64> = f.iter().map(|x| x.powf(power)).collect();
    sequence
        .iter()
        .map(|fj| {
            mu.check_len(fj)?;
            if let Some(i) = neg(fj) {
                return Err(Error::Domain(format!("negative value {} at atom {i}", fj[i])));
            }
            let first = lp_norm_unchecked(&diff(fj, f), q, mu);
            let pow_j: Vec<f64> = fj.iter().map(|x| x.powf(power)).collect();
            let second = lp_norm_unchecked(&diff(&pow_j, &f_pow), p, mu);
            Ok((first, second))
        })
        .collect()
}

pub mod cat;
pub use cat::{cat_quarter_check, CatReport};
