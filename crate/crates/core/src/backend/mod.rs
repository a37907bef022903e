//! Discretized complex-dimension-one Kähler backends.
//!
//! Two geometries are provided: the flat unit-square torus on a periodic `N×N`
//! grid, and the round `ℙ¹` restricted to `S¹`-invariant (zonal) functions on a
//! 1-D grid of equal-area cells. On both, `laplace` realizes `Δ_ω = tr_ω i∂∂̄`,
//! which is half the Riemannian Laplace–Beltrami operator, so that the
//! Monge–Ampère density of a potential is exactly `ρ_u = 1 + Δ_ω u`.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lpq_sphere::MeasureSpace;
use crate::numeric::{compensated_sum, max_abs};

pub mod io;
mod spectral;

use spectral::Spectral;

/// Positivity floor for Monge–Ampère densities (relative to their unit mean).
pub const EPS_POS: f64 = 1e-8;
/// Densities below this trigger a conditioning warning in curvature evaluation.
pub const CONDITIONING_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    FlatTorus,
    RoundP1,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::FlatTorus => "flat-torus",
            BackendKind::RoundP1 => "round-p1",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "flat-torus" | "torus" => Some(BackendKind::FlatTorus),
            "round-p1" | "p1" => Some(BackendKind::RoundP1),
            _ => None,
        }
    }

    /// Average scalar curvature `S̄` in the trace convention.
    pub fn mean_scalar_curvature(self) -> f64 {
        match self {
            BackendKind::FlatTorus => 0.0,
            BackendKind::RoundP1 => 1.0,
        }
    }
}

#[derive(Debug)]
enum Stencil {
    /// 5-point periodic stencil with coefficient `scale / h²`
    Torus { n: usize, coef: f64 },
    /// Flux form: `(Lf)_i = (c_{i+½}(f_{i+1}-f_i) - c_{i-½}(f_i-f_{i-1})) / w_i`
    Zonal { face: Vec<f64> },
}

/// An immutable discretized Kähler geometry.
#[derive(Debug)]
pub struct Geometry {
    kind: BackendKind,
    resolution: usize,
    /// torus: `(x, y)`; ℙ¹: `(θ, cos θ)`
    sites: Vec<[f64; 2]>,
    measure: MeasureSpace,
    stencil: Stencil,
    spectral: OnceLock<Spectral>,
}

/// Periodic `N×N` grid on the unit-square torus (`V = 1`).
pub fn make_torus_geometry(resolution: usize) -> Result<Arc<Geometry>> {
    if resolution < 8 || !resolution.is_multiple_of(2) {
        return Err(Error::Resolution {
            resolution,
            reason: "torus resolution must be even and at least 8",
        });
    }
    let n = resolution;
    let h = 1.0 / n as f64;
    let sites = (0..n * n)
        .map(|idx| [(idx % n) as f64 * h, (idx / n) as f64 * h])
        .collect();
    let measure = MeasureSpace::uniform(n * n, 1.0)?;
    Ok(Arc::new(Geometry {
        kind: BackendKind::FlatTorus,
        resolution: n,
        sites,
        measure,
        // tr_ω i∂∂̄ = ½ Δ_Euclid for ω = dx∧dy
        stencil: Stencil::Torus { n, coef: 0.5 / (h * h) },
        spectral: OnceLock::new(),
    }))
}

/// `S¹`-invariant round `ℙ¹` with `Ric ω = ω` (`V = 4π`), discretized on `N`
/// equal-area cells in the polar angle.
///
/// Cells are uniform in `μ = cos θ`, so every quadrature weight equals
/// `2π·(2/N) = ∫ sin θ dθ dφ` over the cell. The flux form makes the first zonal
/// harmonic `cos θ` an exact eigenfunction with eigenvalue `-1`.
pub fn make_p1_geometry(resolution: usize) -> Result<Arc<Geometry>> {
    if resolution < 16 {
        return Err(Error::Resolution {
            resolution,
            reason: "ℙ¹ resolution must be at least 16",
        });
    }
    let n = resolution;
    let h = 2.0 / n as f64;
    let two_pi = 2.0 * std::f64::consts::PI;
    // θ increasing: μ_i = 1 - (i + ½) h
    let sites = (0..n)
        .map(|i| {
            let mu = 1.0 - (i as f64 + 0.5) * h;
            [mu.acos(), mu]
        })
        .collect();
    let measure = MeasureSpace::uniform(n, 2.0 * two_pi)?;
    // interior faces μ_{i+½} = 1 - (i+1) h, i = 0..n-2; half of the Laplace–Beltrami flux
    let face = (0..n - 1)
        .map(|i| {
            let mu = 1.0 - (i + 1) as f64 * h;
            0.5 * two_pi * (1.0 - mu * mu) / h
        })
        .collect();
    Ok(Arc::new(Geometry {
        kind: BackendKind::RoundP1,
        resolution: n,
        sites,
        measure,
        stencil: Stencil::Zonal { face },
        spectral: OnceLock::new(),
    }))
}

/// Builds a geometry by kind.
pub fn make_geometry(kind: BackendKind, resolution: usize) -> Result<Arc<Geometry>> {
    match kind {
        BackendKind::FlatTorus => make_torus_geometry(resolution),
        BackendKind::RoundP1 => make_p1_geometry(resolution),
    }
}

impl Geometry {
    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn sites(&self) -> &[[f64; 2]] {
        &self.sites
    }

    pub fn weights(&self) -> &[f64] {
        self.measure.weights()
    }

    /// Total volume `V = ∫ ω`.
    pub fn volume(&self) -> f64 {
        self.measure.total()
    }

    /// The quadrature measure `ω` as a measure space.
    pub fn measure(&self) -> &MeasureSpace {
        &self.measure
    }

    /// Grid spacing: `1/N` on the torus, `2/N` in `cos θ` on ℙ¹.
    pub fn spacing(&self) -> f64 {
        match self.kind {
            BackendKind::FlatTorus => 1.0 / self.resolution as f64,
            BackendKind::RoundP1 => 2.0 / self.resolution as f64,
        }
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.measure.integral(f)
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        self.measure.mean(f)
    }

    pub(crate) fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: self.len(),
                got: f.len(),
            });
        }
        Ok(())
    }

    /// Applies the discrete `Δ_ω`.
    pub fn laplace(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.len(), "grid function length");
        match &self.stencil {
            Stencil::Torus { n, coef } => {
                let n = *n;
                let mut out = vec![0.0; n * n];
                for j in 0..n {
                    let jp = if j + 1 == n { 0 } else { j + 1 };
                    let jm = if j == 0 { n - 1 } else { j - 1 };
                    for i in 0..n {
                        let ip = if i + 1 == n { 0 } else { i + 1 };
                        let im = if i == 0 { n - 1 } else { i - 1 };
                        let c = f[j * n + i];
                        out[j * n + i] = coef
                            * ((f[j * n + ip] - c) + (f[j * n + im] - c) + (f[jp * n + i] - c) + (f[jm * n + i] - c));
                    }
                }
                out
            }
            Stencil::Zonal { face } => {
                let w = self.measure.weights();
                let n = f.len();
                let mut out = vec![0.0; n];
                for (i, c) in face.iter().enumerate() {
                    let flux = c * (f[i + 1] - f[i]);
                    out[i] += flux;
                    out[i + 1] -= flux;
                }
                out.iter_mut().zip(w).for_each(|(o, wi)| *o /= wi);
                out
            }
        }
    }

    /// Stencil neighbours of site `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        match &self.stencil {
            Stencil::Torus { n, .. } => {
                let n = *n;
                let (x, y) = (i % n, i / n);
                vec![
                    y * n + (x + 1) % n,
                    y * n + (x + n - 1) % n,
                    ((y + 1) % n) * n + x,
                    ((y + n - 1) % n) * n + x,
                ]
            }
            Stencil::Zonal { .. } => {
                let mut v = Vec::with_capacity(2);
                if i > 0 {
                    v.push(i - 1);
                }
                if i + 1 < self.len() {
                    v.push(i + 1);
                }
                v
            }
        }
    }

    /// Riemannian gradient norm `|∇f|` by central differences (one-sided at the
    /// ℙ¹ poles).
    pub fn gradient_norm(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.len(), "grid function length");
        match &self.stencil {
            Stencil::Torus { n, .. } => {
                let n = *n;
                let h2 = 2.0 / n as f64;
                (0..n * n)
                    .map(|i| {
                        let nb = self.neighbors(i);
                        let gx = (f[nb[0]] - f[nb[1]]) / h2;
                        let gy = (f[nb[2]] - f[nb[3]]) / h2;
                        gx.hypot(gy)
                    })
                    .collect()
            }
            Stencil::Zonal { .. } => {
                let n = self.len();
                (0..n)
                    .map(|i| {
                        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                        let dmu = self.sites[b][1] - self.sites[a][1];
                        let mu = self.sites[i][1];
                        // |∂_θ f| = sin θ |∂_μ f|
                        (1.0 - mu * mu).sqrt() * ((f[b] - f[a]) / dmu).abs()
                    })
                    .collect()
            }
        }
    }

    fn spectral(&self) -> &Spectral {
        self.spectral.get_or_init(|| match &self.stencil {
            Stencil::Torus { n, coef } => Spectral::torus(*n, *coef),
            Stencil::Zonal { face } => Spectral::zonal(face, self.measure.weights()),
        })
    }

    /// Applies `φ(Δ_ω)` through the eigen-decomposition of the (self-adjoint)
    /// discrete operator. `φ` is evaluated at the eigenvalues `λ ≤ 0`; the
    /// constant mode always has `λ = 0` exactly.
    pub fn apply_spectral<F: Fn(f64) -> f64>(&self, f: &[f64], phi: F) -> Vec<f64> {
        self.spectral().apply(f, phi)
    }

    /// Eigenvalues of `Δ_ω` (non-positive), constant mode first.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectral().eigenvalues()
    }

    /// Zero-mean solution of `Δ_ω u = g` for zero-mean `g`.
    pub fn solve_poisson(&self, g: &[f64]) -> Vec<f64> {
        let mut u = self.apply_spectral(g, |l| if l == 0.0 { 0.0 } else { 1.0 / l });
        self.project_zero_mean(&mut u);
        u
    }

    pub fn project_zero_mean(&self, u: &mut [f64]) {
        let m = self.mean(u);
        u.iter_mut().for_each(|v| *v -= m);
    }

    /// Fixed dictionary of 32 smooth test functions (low Fourier modes on the
    /// torus, Legendre polynomials `P_1..P_32` in `cos θ` on ℙ¹).
    pub fn test_dictionary(&self) -> Vec<Vec<f64>> {
        use std::f64::consts::TAU;
        match self.kind {
            BackendKind::FlatTorus => {
                const MODES: [(i32, i32); 16] = [
                    (1, 0),
                    (0, 1),
                    (1, 1),
                    (1, -1),
                    (2, 0),
                    (0, 2),
                    (2, 1),
                    (1, 2),
                    (2, -1),
                    (1, -2),
                    (2, 2),
                    (2, -2),
                    (3, 0),
                    (0, 3),
                    (3, 1),
                    (1, 3),
                ];
                let mut out = Vec::with_capacity(32);
                for (k, l) in MODES {
                    let phase = |s: &[f64; 2]| TAU * (k as f64 * s[0] + l as f64 * s[1]);
                    out.push(self.sites.iter().map(|s| phase(s).cos()).collect());
                    out.push(self.sites.iter().map(|s| phase(s).sin()).collect());
                }
                out
            }
            BackendKind::RoundP1 => (1..=32)
                .map(|l| {
                    self.sites
                        .iter()
                        .map(|s| crate::numeric::legendre_with_derivative(l, s[1]).0)
                        .collect()
                })
                .collect(),
        }
    }
}

/// A normalized Kähler potential: zero `ω`-mean and `ρ_u > EPS_POS` everywhere.
#[derive(Debug, Clone)]
pub struct Potential {
    geometry: Arc<Geometry>,
    values: Vec<f64>,
    density: Vec<f64>,
}

impl Potential {
    /// Validates normalization and Kähler positivity.
    pub fn new(geometry: Arc<Geometry>, values: Vec<f64>) -> Result<Self> {
        geometry.check_len(&values)?;
        let scale = max_abs(&values);
        let mean = geometry.integrate(&values);
        if mean.abs() > 1e-10 * geometry.volume() * scale.max(f64::MIN_POSITIVE) && mean != 0.0 {
            return Err(Error::NotNormalized { mean });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite potential value".into()));
        }
        let lap = geometry.laplace(&values);
        let density: Vec<f64> = lap.iter().map(|l| 1.0 + l).collect();
        check_positive(&density)?;
        Ok(Potential {
            geometry,
            values,
            density,
        })
    }

    /// Projects `values` to zero mean, then validates.
    pub fn normalized(geometry: Arc<Geometry>, mut values: Vec<f64>) -> Result<Self> {
        geometry.check_len(&values)?;
        geometry.project_zero_mean(&mut values);
        Self::new(geometry, values)
    }

    /// The reference potential `u = 0`.
    pub fn zero(geometry: Arc<Geometry>) -> Self {
        let n = geometry.len();
        Potential {
            geometry,
            values: vec![0.0; n],
            density: vec![1.0; n],
        }
    }

    pub fn geometry(&self) -> &Arc<Geometry> {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `ρ_u = ω_u/ω`.
    pub fn density_values(&self) -> &[f64] {
        &self.density
    }

    pub fn min_density(&self) -> (usize, f64) {
        self.density
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |m, (i, v)| if v < m.1 { (i, v) } else { m })
    }

    pub(crate) fn same_geometry(&self, other: &Potential) -> Result<()> {
        if !Arc::ptr_eq(&self.geometry, &other.geometry)
            && (self.geometry.kind != other.geometry.kind || self.geometry.len() != other.geometry.len())
        {
            return Err(Error::ShapeMismatch {
                expected: self.geometry.len(),
                got: other.geometry.len(),
            });
        }
        Ok(())
    }
}

fn check_positive(density: &[f64]) -> Result<()> {
    for (site, &d) in density.iter().enumerate() {
        if !(d > EPS_POS) {
            return Err(Error::NotKahler { site, density: d });
        }
    }
    Ok(())
}

/// The Monge–Ampère density ratio `ω_u/ω`, positive with unit `ω`-mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    values: Vec<f64>,
}

impl Density {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `ρ_u = 1 + Δ_ω u`.
pub fn density(u: &Potential) -> Density {
    Density {
        values: u.density.clone(),
    }
}

/// Inverts the density map: the unique zero-mean `u` with `1 + Δ_ω u = ρ`.
///
/// In complex dimension one this is a linear Poisson problem; `ρ` must be
/// positive with unit `ω`-mean.
pub fn calabi_yau_inverse(rho: &[f64], geometry: &Arc<Geometry>) -> Result<Potential> {
    geometry.check_len(rho)?;
    check_positive(rho)?;
    let mean = geometry.mean(rho);
    if (mean - 1.0).abs() > 1e-9 {
        return Err(Error::InconsistentDensity { mean });
    }
    let rhs: Vec<f64> = rho.iter().map(|r| r - mean).collect();
    let u = geometry.solve_poisson(&rhs);
    let pot = Potential::new(geometry.clone(), u)?;
    let resid = pot
        .density
        .iter()
        .zip(rho)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if resid > 1e-8 * max_abs(rho).max(1.0) {
        return Err(Error::Numeric(format!("Poisson residual {resid:e}")));
    }
    Ok(pot)
}

/// `Δ_{ω_u} β = Δ_ω β / ρ_u`.
pub fn weighted_laplacian(u: &Potential, beta: &[f64]) -> Result<Vec<f64>> {
    u.geometry.check_len(beta)?;
    Ok(u.geometry
        .laplace(beta)
        .into_iter()
        .zip(&u.density)
        .map(|(l, r)| l / r)
        .collect())
}

/// Scalar curvature of `ω_u` in the trace convention:
/// torus `S = -Δ_{ω_u} log ρ_u`, ℙ¹ `S = (1 - Δ_ω log ρ_u)/ρ_u`.
pub fn scalar_curvature(u: &Potential) -> Vec<f64> {
    let (site, min) = u.min_density();
    if min < CONDITIONING_FLOOR {
        log::warn!("scalar curvature: density {min:e} at site {site} is poorly conditioned");
    }
    let log_rho: Vec<f64> = u.density.iter().map(|r| r.ln()).collect();
    let lap = u.geometry.laplace(&log_rho);
    let ricci_trace = u.geometry.kind.mean_scalar_curvature();
    lap.iter()
        .zip(&u.density)
        .map(|(l, r)| (ricci_trace - l) / r)
        .collect()
}

/// `(1/V) ∫ S ω_u`, which equals `S̄` for every admissible potential.
pub fn mean_scalar_curvature(u: &Potential) -> f64 {
    let s = scalar_curvature(u);
    compensated_sum(
        s.iter()
            .zip(&u.density)
            .zip(u.geometry.weights())
            .map(|((s, r), w)| s * r * w),
    ) / u.geometry.volume()
}

/// A random smooth admissible potential built from low modes, scaled so that
/// `max |ρ_u - 1| = spread` (`0 < spread < 1`).
pub fn random_potential<R: Rng + ?Sized>(geometry: &Arc<Geometry>, rng: &mut R, spread: f64) -> Potential {
    use std::f64::consts::TAU;
    let mut values = vec![0.0; geometry.len()];
    match geometry.kind {
        BackendKind::FlatTorus => {
            for k in -2i32..=2 {
                for l in -2i32..=2 {
                    if k == 0 && l == 0 {
                        continue;
                    }
                    let a: f64 = rng.random_range(-1.0..1.0);
                    let ph: f64 = rng.random_range(0.0..TAU);
                    let decay = 1.0 / (k * k + l * l) as f64;
                    for (v, s) in values.iter_mut().zip(geometry.sites()) {
                        *v += a * decay * (TAU * (k as f64 * s[0] + l as f64 * s[1]) + ph).cos();
                    }
                }
            }
        }
        BackendKind::RoundP1 => {
            for l in 1..=6 {
                let a: f64 = rng.random_range(-1.0..1.0) / l as f64;
                for (v, s) in values.iter_mut().zip(geometry.sites()) {
                    *v += a * crate::numeric::legendre_with_derivative(l, s[1]).0;
                }
            }
        }
    }
    scaled_potential(geometry, values, spread)
}

/// Rescales a shape so that `max |Δ_ω u| = spread`, normalizes and validates.
pub fn scaled_potential(geometry: &Arc<Geometry>, mut values: Vec<f64>, spread: f64) -> Potential {
    geometry.project_zero_mean(&mut values);
    let lap = max_abs(&geometry.laplace(&values));
    if lap > 0.0 {
        values.iter_mut().for_each(|v| *v *= spread / lap);
    }
    Potential::normalized(geometry.clone(), values).expect("spread < 1 keeps the density positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn gradient_of_linear_modes() {
        let g = make_torus_geometry(128).unwrap();
        let f: Vec<f64> = g.sites().iter().map(|s| (TAU * s[0]).sin()).collect();
        let grad = g.gradient_norm(&f);
        for (s, d) in g.sites().iter().zip(&grad) {
            assert!((d - TAU * (TAU * s[0]).cos().abs()).abs() < 1e-2);
        }
        let g = make_p1_geometry(64).unwrap();
        let f: Vec<f64> = g.sites().iter().map(|s| s[1]).collect();
        let grad = g.gradient_norm(&f);
        for (s, d) in g.sites().iter().zip(&grad) {
            assert!((d - s[0].sin()).abs() < 1e-12);
        }
        assert_eq!(g.neighbors(0), vec![1]);
        assert_eq!(make_torus_geometry(8).unwrap().neighbors(0), vec![1, 7, 8, 56]);
    }

    #[test]
    fn resolution_errors() {
        assert!(matches!(make_torus_geometry(9), Err(Error::Resolution { .. })));
        assert!(matches!(make_torus_geometry(6), Err(Error::Resolution { .. })));
        assert!(matches!(make_p1_geometry(8), Err(Error::Resolution { .. })));
    }

    #[test]
    fn constants_are_annihilated_and_volume_is_quadrature_of_one() {
        for g in [make_torus_geometry(16).unwrap(), make_p1_geometry(32).unwrap()] {
            let ones = vec![1.0; g.len()];
            assert!(max_abs(&g.laplace(&ones)) < 1e-10);
            assert!((g.integrate(&ones) - g.volume()).abs() < 1e-12 * g.volume());
        }
        assert_eq!(make_torus_geometry(16).unwrap().volume(), 1.0);
        assert!((make_p1_geometry(32).unwrap().volume() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn torus_fourier_eigenfunction() {
        let g = make_torus_geometry(256).unwrap();
        let u: Vec<f64> = g.sites().iter().map(|s| (TAU * s[0]).cos()).collect();
        let lap = g.laplace(&u);
        for (i, (l, v)) in lap.iter().zip(&u).enumerate().step_by(97) {
            let expect = -TAU * TAU * 0.5 * v;
            assert!((l - expect).abs() <= 1e-3 * TAU * TAU * 0.5, "site {i}: {l} vs {expect}");
        }
    }

    #[test]
    fn p1_first_zonal_harmonic_is_exact() {
        let g = make_p1_geometry(64).unwrap();
        let u: Vec<f64> = g.sites().iter().map(|s| s[1]).collect();
        let lap = g.laplace(&u);
        for (l, v) in lap.iter().zip(&u) {
            assert!((l + v).abs() < 1e-12);
        }
    }

    #[test]
    fn p1_dense_eigenvalue_oracle() {
        // independent dense eigensolve of the weighted stiffness matrix
        let n = 64;
        let g = make_p1_geometry(n).unwrap();
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = g.laplace(&e);
            for i in 0..n {
                a[(i, j)] = col[i];
            }
        }
        let a = (&a + a.transpose()) * 0.5;
        let mut ev: Vec<f64> = a.symmetric_eigenvalues().iter().map(|x| -x).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!(ev[0].abs() < 1e-10);
        assert!((ev[1] - 1.0).abs() < 1e-4, "λ1 = {}", ev[1]);
        // λ_l = l(l+1)/2 at second order
        assert!((ev[2] - 3.0).abs() < 1e-9);
        assert!((ev[4] - 10.0).abs() < 1e-9);
        // agreement with the cached spectral decomposition
        let mut cached: Vec<f64> = g.eigenvalues().iter().map(|x| -x).collect();
        cached.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in ev.iter().zip(&cached) {
            assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn eigenvalues_converge_at_second_order() {
        // the equal-area zonal stencil reproduces the low spectrum l(l+1)/2 exactly
        for n in [32usize, 64, 128] {
            let g = make_p1_geometry(n).unwrap();
            let mut ev: Vec<f64> = g.eigenvalues().iter().map(|x| -x).collect();
            ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (l, &e) in ev.iter().enumerate().take(8).skip(1) {
                let exact = (l * (l + 1)) as f64 / 2.0;
                assert!((e - exact).abs() < 1e-9, "n={n} l={l}: {e}");
            }
        }
        let terr = |n: usize| {
            let g = make_torus_geometry(n).unwrap();
            let mut ev: Vec<f64> = g.eigenvalues().iter().map(|x| -x).collect();
            ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
            (ev[1] - 2.0 * PI * PI).abs()
        };
        let ratio = terr(16) / terr(32);
        assert!((3.6..4.4).contains(&ratio), "torus ratio {ratio}");
    }

    #[test]
    fn self_adjoint_and_zero_mean_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for g in [make_torus_geometry(16).unwrap(), make_p1_geometry(40).unwrap()] {
            let f: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lf = g.laplace(&f);
            let lh = g.laplace(&h);
            let a = g.integrate(&lf.iter().zip(&h).map(|(x, y)| x * y).collect::<Vec<_>>());
            let b = g.integrate(&lh.iter().zip(&f).map(|(x, y)| x * y).collect::<Vec<_>>());
            let scale = g.integrate(&lf.iter().map(|x| x.abs()).collect::<Vec<_>>());
            assert!((a - b).abs() < 1e-10 * scale, "{a} vs {b}");
            assert!(g.integrate(&lf).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn zero_potential_has_unit_density_and_reference_curvature() {
        let t = make_torus_geometry(16).unwrap();
        let u = Potential::zero(t.clone());
        assert!(density(&u).values().iter().all(|r| *r == 1.0));
        assert!(scalar_curvature(&u).iter().all(|s| s.abs() < 1e-12));
        let p = make_p1_geometry(64).unwrap();
        let u = Potential::zero(p);
        assert!(scalar_curvature(&u).iter().all(|s| (s - 1.0).abs() < 1e-6));
    }

    #[test]
    fn torus_density_is_linear() {
        let g = make_torus_geometry(128).unwrap();
        let a = 1e-3;
        let vals: Vec<f64> = g.sites().iter().map(|s| a * (TAU * s[0]).cos()).collect();
        let u = Potential::normalized(g.clone(), vals).unwrap();
        for (r, s) in density(&u).values().iter().zip(g.sites()).step_by(131) {
            let expect = 1.0 - a * 0.5 * TAU * TAU * (TAU * s[0]).cos();
            assert!((r - expect).abs() < 1e-5);
        }
    }

    #[test]
    fn density_conservation_and_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in [make_torus_geometry(32).unwrap(), make_p1_geometry(128).unwrap()] {
            for _ in 0..50 {
                let u = random_potential(&g, &mut rng, 0.9);
                let rho = density(&u);
                assert!((g.mean(rho.values()) - 1.0).abs() < 1e-12);
                let back = calabi_yau_inverse(rho.values(), &g).unwrap();
                let err = back
                    .values()
                    .iter()
                    .zip(u.values())
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                assert!(err < 1e-9, "round trip error {err:e}");
            }
        }
    }

    #[test]
    fn calabi_yau_of_unit_density_is_zero() {
        let g = make_torus_geometry(16).unwrap();
        let u = calabi_yau_inverse(&vec![1.0; g.len()], &g).unwrap();
        assert!(max_abs(u.values()) < 1e-14);
    }

    #[test]
    fn inconsistent_density_mean_is_rejected() {
        let g = make_torus_geometry(16).unwrap();
        let err = calabi_yau_inverse(&vec![1.01; g.len()], &g).unwrap_err();
        assert!(matches!(err, Error::InconsistentDensity { .. }));
    }

    #[test]
    fn non_kahler_potential_reports_site() {
        let g = make_torus_geometry(16).unwrap();
        let vals: Vec<f64> = g.sites().iter().map(|s| 0.1 * (TAU * s[0]).cos()).collect();
        assert!(matches!(Potential::normalized(g, vals), Err(Error::NotKahler { .. })));
    }

    #[test]
    fn weighted_laplacian_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in [make_torus_geometry(16).unwrap(), make_p1_geometry(48).unwrap()] {
            let u = random_potential(&g, &mut rng, 0.7);
            let beta: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let wl = weighted_laplacian(&u, &beta).unwrap();
            let mass = g.integrate(&wl.iter().zip(u.density_values()).map(|(a, r)| a * r).collect::<Vec<_>>());
            assert!(mass.abs() < 1e-10 * max_abs(&wl) * g.volume());
            assert!(max_abs(&weighted_laplacian(&u, &vec![2.5; g.len()]).unwrap()) < 1e-10);
            let z = Potential::zero(g.clone());
            assert_eq!(weighted_laplacian(&z, &beta).unwrap(), g.laplace(&beta));
        }
    }

    #[test]
    fn curvature_average_is_topological() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for g in [make_torus_geometry(16).unwrap(), make_p1_geometry(64).unwrap()] {
            for _ in 0..20 {
                let u = random_potential(&g, &mut rng, 0.95);
                let avg = mean_scalar_curvature(&u);
                assert!((avg - g.kind().mean_scalar_curvature()).abs() < 1e-6, "{avg}");
            }
        }
    }

    #[test]
    fn dictionary_has_32_bounded_functions() {
        for g in [make_torus_geometry(16).unwrap(), make_p1_geometry(64).unwrap()] {
            let d = g.test_dictionary();
            assert_eq!(d.len(), 32);
            assert!(d.iter().all(|f| f.len() == g.len() && max_abs(f) <= 1.0 + 1e-12));
        }
    }
}
