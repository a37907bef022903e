//! Co-vanishing diagnostics for the four convergence notions of finite-entropy
//! sequences, and the serializable metric report.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{calabi_cauchy_stat, entropy, l1_distance, mabuchi_cauchy_stat};
use crate::backend::Potential;
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::par;

/// One `(j, k, stat_name, value)` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStat {
    pub j: usize,
    pub k: usize,
    pub stat_name: String,
    pub value: f64,
}

/// Distances, brackets, Cauchy statistics and entropies gathered by one experiment.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub p: f64,
    pub q: f64,
    /// Mabuchi exponent `p′`
    pub p_prime: f64,
    /// `(lower, upper)` Calabi distance brackets
    pub calabi_brackets: Vec<(f64, f64)>,
    pub mabuchi_lengths: Vec<f64>,
    pub cauchy_stats: Vec<PairStat>,
    pub entropies: Vec<f64>,
}

impl MetricReport {
    pub fn new(p: f64, q: f64, p_prime: f64) -> Self {
        MetricReport {
            p,
            q,
            p_prime,
            ..Default::default()
        }
    }

    pub fn push_stat(&mut self, j: usize, k: usize, name: &str, value: f64) {
        self.cauchy_stats.push(PairStat {
            j,
            k,
            stat_name: name.to_string(),
            value,
        });
    }

    pub fn push_bracket(&mut self, lower: f64, upper: f64) -> Result<()> {
        if !(lower <= upper) {
            return Err(Error::Numeric(format!("bracket lower {lower} exceeds upper {upper}")));
        }
        self.calabi_brackets.push((lower, upper));
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-pair statistics as CSV with header `j,k,stat_name,value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_pair_csv(&mut w, &self.cauchy_stats)
    }
}

pub fn write_pair_csv<W: Write>(mut w: W, rows: &[PairStat]) -> Result<()> {
    writeln!(w, "j,k,stat_name,value")?;
    for r in rows {
        writeln!(w, "{},{},{},{:?}", r.j, r.k, r.stat_name, r.value)?;
    }
    Ok(())
}

/// The four statistics for one sequence element against the limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub j: usize,
    /// (i) `∫ |u_j - u| ω`
    pub l1: f64,
    /// (ii) `max_φ |∫ φ (ρ_j - ρ) ω|` over the fixed test dictionary
    pub weak: f64,
    /// (iii) Mabuchi Cauchy statistic with exponent `p′`
    pub mabuchi: f64,
    /// (iv) Calabi Cauchy statistic with `q = 1`
    pub calabi: f64,
    pub entropy: f64,
}

impl DiagnosticRow {
    pub fn stats(&self) -> [f64; 4] {
        [self.l1, self.weak, self.mabuchi, self.calabi]
    }
}

pub const STAT_NAMES: [&str; 4] = ["l1", "weak", "mabuchi", "calabi"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceDiagnostics {
    pub p_prime: f64,
    pub rows: Vec<DiagnosticRow>,
    pub limit_entropy: f64,
    /// `max |Ent(u_j) - Ent(u)|` over the second half of the sequence
    pub entropy_drift: f64,
}

impl EquivalenceDiagnostics {
    /// The implication "some statistic below `small` ⇒ all statistics below
    /// `large`" on every row.
    pub fn co_vanish(&self, small: f64, large: f64) -> bool {
        self.rows.iter().all(|r| {
            let s = r.stats();
            let any_small = s.iter().any(|v| *v < small);
            !any_small || s.iter().all(|v| *v < large)
        })
    }

    /// Rows violating [`Self::co_vanish`].
    pub fn violations(&self, small: f64, large: f64) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|r| {
                let s = r.stats();
                s.iter().any(|v| *v < small) && s.iter().any(|v| *v >= large)
            })
            .map(|r| r.j)
            .collect()
    }

    /// A statistic that shrinks by more than `drop` from first to last row while
    /// another keeps at least half its initial value. Returns the two names.
    pub fn decoupling(&self, drop: f64) -> Option<(&'static str, &'static str)> {
        let (first, last) = (self.rows.first()?, self.rows.last()?);
        let (a, b) = (first.stats(), last.stats());
        for i in 0..4 {
            if !(a[i] > 0.0 && b[i] * drop < a[i]) {
                continue;
            }
            for k in 0..4 {
                if k != i && a[k] > 0.0 && b[k] >= 0.5 * a[k] {
                    return Some((STAT_NAMES[i], STAT_NAMES[k]));
                }
            }
        }
        None
    }

    pub fn pair_stats(&self) -> Vec<PairStat> {
        let limit = self.rows.len();
        let mut out = Vec::with_capacity(5 * self.rows.len());
        for r in &self.rows {
            for (name, v) in STAT_NAMES.iter().zip(r.stats()) {
                out.push(PairStat {
                    j: r.j,
                    k: limit,
                    stat_name: name.to_string(),
                    value: v,
                });
            }
            out.push(PairStat {
                j: r.j,
                k: limit,
                stat_name: "entropy".into(),
                value: r.entropy,
            });
        }
        out
    }
}

/// Statistics (i)–(iv) of every `u_j` against `u`. The limit index `k` in the
/// pair output is the sequence length.
pub fn equivalence_diagnostics(seq: &[Potential], u: &Potential, p_prime: f64) -> Result<EquivalenceDiagnostics> {
    for s in seq {
        s.same_geometry(u)?;
    }
    let g = u.geometry();
    let dict = g.test_dictionary();
    let rho = u.density_values();
    let rows = par::map_indexed(seq.len(), |j| -> Result<DiagnosticRow> {
        let uj = &seq[j];
        let diff: Vec<f64> = uj.density_values().iter().zip(rho).map(|(a, b)| a - b).collect();
        let weak = dict
            .iter()
            .map(|phi| compensated_sum(phi.iter().zip(&diff).zip(g.weights()).map(|((f, d), w)| w * f * d)).abs())
            .fold(0.0_f64, f64::max);
        Ok(DiagnosticRow {
            j,
            l1: l1_distance(uj, u),
            weak,
            mabuchi: mabuchi_cauchy_stat(uj, u, p_prime)?,
            calabi: calabi_cauchy_stat(uj, u, 1.0)?,
            entropy: entropy(uj),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let limit_entropy = entropy(u);
    let entropy_drift = rows[rows.len() / 2..]
        .iter()
        .map(|r| (r.entropy - limit_entropy).abs())
        .fold(0.0_f64, f64::max);
    Ok(EquivalenceDiagnostics {
        p_prime,
        rows,
        limit_entropy,
        entropy_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{make_torus_geometry, random_potential};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_sequence_has_zero_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = make_torus_geometry(16).unwrap();
        let u = random_potential(&g, &mut rng, 0.5);
        let d = equivalence_diagnostics(&vec![u.clone(); 4], &u, 1.0).unwrap();
        assert!(d.rows.iter().all(|r| r.stats() == [0.0; 4]));
        assert_eq!(d.entropy_drift, 0.0);
        assert!(d.co_vanish(1e-6, 1e-4));
    }

    #[test]
    fn smooth_family_co_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = make_torus_geometry(32).unwrap();
        let u = random_potential(&g, &mut rng, 0.5);
        let phi = random_potential(&g, &mut rng, 0.3);
        let seq: Vec<Potential> = (1..=12)
            .map(|j| {
                let s = 4f64.powi(-j);
                Potential::new(g.clone(), u.values().iter().zip(phi.values()).map(|(a, b)| a + s * b).collect()).unwrap()
            })
            .collect();
        let d = equivalence_diagnostics(&seq, &u, 1.0).unwrap();
        assert!(d.co_vanish(1e-6, 1e-4));
        assert!(d.rows.last().unwrap().stats().iter().all(|v| *v < 1e-6));
        assert!(d.decoupling(100.0).is_none());
    }

    #[test]
    fn report_csv_and_json() {
        let mut r = MetricReport::new(2.0, 1.0, 1.0);
        r.push_stat(0, 1, "calabi", 0.25);
        r.push_bracket(0.1, 0.2).unwrap();
        assert!(r.push_bracket(0.3, 0.2).is_err());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "j,k,stat_name,value\n0,1,calabi,0.25\n");
        let back: MetricReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back.calabi_brackets, vec![(0.1, 0.2)]);
    }
}
