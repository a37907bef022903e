//! CAT(1/4) comparison for geodesic triangles on the radius-2 `L²`-octant.
//!
//! Three octant points span a 3-dimensional subspace whose intersection with the
//! sphere is a round 2-sphere of radius 2. Edges are great-circle arcs inside that
//! span. The comparison triangle is built from the three side lengths alone on
//! the model sphere of curvature 1/4, and distances between sampled edge points
//! are compared against their model counterparts.

use serde::{Deserialize, Serialize};

use super::{MeasureSpace, SphereFunction};
use crate::error::{Error, Result};

const MODEL_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatReport {
    /// side lengths `d(V,W)`, `d(U,W)`, `d(U,V)`
    pub sides: [f64; 3],
    pub perimeter: f64,
    pub rank: usize,
    pub pairs_checked: usize,
    /// `max (d(x,y) - d̄(x̄,ȳ))` over sampled pairs
    pub max_violation: f64,
    /// reconstruction residual of the vertices from the orthonormalized span
    pub span_residual: f64,
}

type Vec3 = [f64; 3];

fn dot3(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: &Vec3) -> f64 {
    dot3(a, a).sqrt()
}

/// Great-circle distance on the sphere of radius `R` through `atan2`, stable for
/// nearby points.
fn sphere_distance(a: &Vec3, b: &Vec3) -> f64 {
    MODEL_RADIUS * norm3(&cross3(a, b)).atan2(dot3(a, b))
}

fn slerp(a: &Vec3, b: &Vec3, s: f64) -> Vec3 {
    let theta = norm3(&cross3(a, b)).atan2(dot3(a, b));
    if theta < 1e-300 {
        return *a;
    }
    let sa = ((1.0 - s) * theta).sin() / theta.sin();
    let sb = (s * theta).sin() / theta.sin();
    [sa * a[0] + sb * b[0], sa * a[1] + sb * b[1], sa * a[2] + sb * b[2]]
}

/// Modified Gram–Schmidt with column pivoting and one reorthogonalization pass.
/// Returns the orthonormal basis (in the normalized `L²` inner product) and the
/// coordinates of each input.
fn pivoted_gram_schmidt(vectors: &[&[f64]], mu: &MeasureSpace) -> (Vec<Vec<f64>>, Vec<Vec3>) {
    let inner = |a: &[f64], b: &[f64]| {
        mu.mean(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>())
    };
    let scale = vectors
        .iter()
        .map(|v| inner(v, v).sqrt())
        .fold(0.0_f64, f64::max);
    let mut residuals: Vec<Vec<f64>> = vectors.iter().map(|v| v.to_vec()).collect();
    let mut used = [false; 3];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for _ in 0..3 {
        let (idx, nrm) = (0..3)
            .filter(|i| !used[*i])
            .map(|i| (i, inner(&residuals[i], &residuals[i]).sqrt()))
            .fold((usize::MAX, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if idx == usize::MAX || nrm <= 1e-13 * scale {
            break;
        }
        used[idx] = true;
        let e: Vec<f64> = residuals[idx].iter().map(|x| x / nrm).collect();
        for (i, res) in residuals.iter_mut().enumerate() {
            if used[i] {
                continue;
            }
            for _ in 0..2 {
                let c = inner(res, &e);
                res.iter_mut().zip(&e).for_each(|(r, ek)| *r -= c * ek);
            }
        }
        basis.push(e);
    }
    let coords = vectors
        .iter()
        .map(|v| {
            let mut c = [0.0; 3];
            for (k, e) in basis.iter().enumerate() {
                c[k] = inner(v, e);
            }
            c
        })
        .collect();
    (basis, coords)
}

/// Model triangle with the given side lengths on the sphere of radius 2.
fn comparison_triangle(sides: [f64; 3]) -> [Vec3; 3] {
    let [a, b, c] = sides.map(|s| s / MODEL_RADIUS);
    let u = [MODEL_RADIUS, 0.0, 0.0];
    let v = [MODEL_RADIUS * c.cos(), MODEL_RADIUS * c.sin(), 0.0];
    let y = if c.sin().abs() > 0.0 {
        (a.cos() - b.cos() * c.cos()) / c.sin()
    } else {
        0.0
    };
    let z = (1.0 - b.cos().powi(2) - y * y).max(0.0).sqrt();
    let w = [MODEL_RADIUS * b.cos(), MODEL_RADIUS * y, MODEL_RADIUS * z];
    [u, v, w]
}

/// Checks the CAT(1/4) inequality on `samples × samples` point pairs for each
/// pair of edges of the triangle `UVW`.
pub fn cat_quarter_check(
    u: &SphereFunction,
    v: &SphereFunction,
    w: &SphereFunction,
    mu: &MeasureSpace,
    samples: usize,
) -> Result<CatReport> {
    for x in [u, v, w] {
        if (x.exponent_ratio() - 2.0).abs() > 1e-14 || (x.radius() - MODEL_RADIUS).abs() > 1e-12 {
            return Err(Error::Domain("CAT(1/4) check needs points of the radius-2 L² octant".into()));
        }
        if x.values().len() != mu.len() {
            return Err(Error::ShapeMismatch {
                expected: mu.len(),
                got: x.values().len(),
            });
        }
    }
    let (basis, coords) = pivoted_gram_schmidt(&[u.values(), v.values(), w.values()], mu);
    let rank = basis.len();
    let span_residual = [u, v, w]
        .iter()
        .zip(&coords)
        .map(|(x, c)| {
            let mut rec = vec![0.0; mu.len()];
            for (k, e) in basis.iter().enumerate() {
                rec.iter_mut().zip(e).for_each(|(r, ek)| *r += c[k] * ek);
            }
            rec.iter()
                .zip(x.values())
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        })
        .fold(0.0_f64, f64::max);
    let [cu, cv, cw] = [coords[0], coords[1], coords[2]];
    let sides = [sphere_distance(&cv, &cw), sphere_distance(&cu, &cw), sphere_distance(&cu, &cv)];
    let perimeter = sides.iter().sum::<f64>();
    let bound = 2.0 * std::f64::consts::PI * MODEL_RADIUS;
    if perimeter >= bound {
        return Err(Error::NotComparable { perimeter, bound });
    }
    if rank <= 1 {
        // all three vertices coincide
        return Ok(CatReport {
            sides,
            perimeter,
            rank,
            pairs_checked: 0,
            max_violation: 0.0,
            span_residual,
        });
    }
    if rank < 3 {
        return Err(Error::RankDeficient { rank });
    }
    let model = comparison_triangle(sides);
    let verts = [cu, cv, cw];
    let edges = [(0usize, 1usize), (1, 2), (2, 0)];
    let n = samples.max(2);
    let fractions: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let mut max_violation = f64::NEG_INFINITY;
    let mut pairs = 0;
    for (ei, &(a0, a1)) in edges.iter().enumerate() {
        for &(b0, b1) in edges.iter().skip(ei + 1) {
            for &s in &fractions {
                let x = slerp(&verts[a0], &verts[a1], s);
                let xm = slerp(&model[a0], &model[a1], s);
                for &t in &fractions {
                    let y = slerp(&verts[b0], &verts[b1], t);
                    let ym = slerp(&model[b0], &model[b1], t);
                    let excess = sphere_distance(&x, &y) - sphere_distance(&xm, &ym);
                    max_violation = max_violation.max(excess);
                    pairs += 1;
                }
            }
        }
    }
    Ok(CatReport {
        sides,
        perimeter,
        rank,
        pairs_checked: pairs,
        max_violation,
        span_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpq_sphere::sphere_project;

    fn l2_point(f: &[f64], mu: &MeasureSpace) -> SphereFunction {
        sphere_project(f, 2.0, 1.0, 2.0, mu).unwrap()
    }

    #[test]
    fn coincident_vertices_are_trivial() {
        let mu = MeasureSpace::uniform(4, 1.0).unwrap();
        let u = l2_point(&[1.0, 2.0, 3.0, 4.0], &mu);
        let rep = cat_quarter_check(&u, &u, &u, &mu, 10).unwrap();
        assert_eq!(rep.max_violation, 0.0);
        assert_eq!(rep.pairs_checked, 0);
    }

    #[test]
    fn collinear_span_is_rank_deficient() {
        // three distinct points on one great circle: span has rank 2
        let mu = MeasureSpace::uniform(3, 1.0).unwrap();
        let u = l2_point(&[1.0, 2.0, 1.0], &mu);
        let v = l2_point(&[2.0, 1.0, 1.0], &mu);
        let mid: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a + b).collect();
        let w = l2_point(&mid, &mu);
        assert!(matches!(
            cat_quarter_check(&u, &v, &w, &mu, 10),
            Err(Error::RankDeficient { rank: 2 })
        ));
    }

    #[test]
    fn thin_triangle_holds_with_near_equality() {
        let mu = MeasureSpace::uniform(5, 1.0).unwrap();
        let u = l2_point(&[1.0, 2.0, 1.0, 1.5, 1.0], &mu);
        let v = l2_point(&[2.0, 1.0, 1.0, 1.0, 1.2], &mu);
        let w = l2_point(&[1.5, 1.5, 1.0 + 1e-4, 1.25, 1.1], &mu);
        let rep = cat_quarter_check(&u, &v, &w, &mu, 30).unwrap();
        assert_eq!(rep.rank, 3);
        assert!(rep.max_violation < 1e-10, "{}", rep.max_violation);
        assert!(rep.max_violation > -1e-10);
        assert!(rep.span_residual < 1e-12);
    }

    #[test]
    fn model_triangle_reproduces_sides() {
        let sides = [0.7, 1.1, 0.9];
        let m = comparison_triangle(sides);
        assert!((sphere_distance(&m[1], &m[2]) - 0.7).abs() < 1e-14);
        assert!((sphere_distance(&m[0], &m[2]) - 1.1).abs() < 1e-14);
        assert!((sphere_distance(&m[0], &m[1]) - 0.9).abs() < 1e-14);
    }
}
