//! Sweeps over families of sequences: domination of the Mabuchi statistic by the
//! Calabi statistic for `q > 1`, and co-vanishing of the four convergence
//! statistics along entropy-convergent sequences.

use serde::{Deserialize, Serialize};

use super::{log_log_slope, push_stat, VerdictTable};
use crate::backend::Potential;
use crate::error::{Error, Result};
use crate::finsler::{
    calabi_cauchy_stat, check_exponents, mabuchi_cauchy_stat, sup_distance, equivalence_diagnostics,
    EquivalenceDiagnostics, PairStat,
};

/// A Calabi statistic below this counts as "vanished".
pub const CALABI_SMALL: f64 = 1e-6;
/// The Mabuchi statistic must then be below this.
pub const MABUCHI_LARGE: f64 = 1e-4;

/// Sup-norm bound implied by a vanished Calabi statistic through the modulus
/// `sup |u - v| ≲ ‖ρ_u - ρ_v‖_{L^q}`.
pub fn sup_threshold(q: f64) -> f64 {
    CALABI_SMALL.powf(1.0 / q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationPair {
    pub family: usize,
    pub j: usize,
    pub k: usize,
    pub calabi: f64,
    pub mabuchi: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationReport {
    pub p: f64,
    pub q: f64,
    pub p_prime: f64,
    pub pairs: Vec<DominationPair>,
    /// pairs with a vanished Calabi statistic but a large Mabuchi statistic
    pub counterexamples: Vec<DominationPair>,
    /// `(threshold, max mabuchi, max sup)` over pairs with Calabi statistic below the threshold
    pub modulus: Vec<(f64, f64, f64)>,
    /// log-log slope of the Mabuchi against the Calabi statistic
    pub modulus_exponent: Option<f64>,
}

impl DominationReport {
    pub fn pair_stats(&self) -> Vec<PairStat> {
        let mut out = Vec::new();
        for p in &self.pairs {
            push_stat(&mut out, p.j, p.k, &format!("f{}.calabi", p.family), p.calabi);
            push_stat(&mut out, p.j, p.k, &format!("f{}.mabuchi", p.family), p.mabuchi);
            push_stat(&mut out, p.j, p.k, &format!("f{}.sup", p.family), p.sup);
        }
        out
    }

    pub fn verdicts(&self) -> VerdictTable {
        let mut t = VerdictTable::new("q-domination");
        let n = self.counterexamples.len();
        t.check(
            "no_counterexamples",
            n == 0,
            Some(n as f64),
            format!("pairs with calabi_q < {CALABI_SMALL:e} and mabuchi ≥ {MABUCHI_LARGE:e}"),
        );
        let vanished = self.pairs.iter().filter(|p| p.calabi < CALABI_SMALL).count();
        t.check(
            "calabi_vanishes_somewhere",
            vanished > 0,
            Some(vanished as f64),
            "at least one pair reaches the vanishing threshold, so the check is not vacuous",
        );
        let sup_ok = self
            .pairs
            .iter()
            .filter(|p| p.calabi < CALABI_SMALL)
            .all(|p| p.sup < sup_threshold(self.q));
        t.check(
            "sup_oscillation_vanishes",
            sup_ok,
            None,
            format!("sup |u_j - u_k| < {:.1e} whenever calabi_q < {CALABI_SMALL:e}", sup_threshold(self.q)),
        );
        if let Some(e) = self.modulus_exponent {
            t.record("modulus_exponent", e);
        }
        t
    }
}

/// All pairs `j < k` of every family. Requires `q > 1`.
pub fn q_gt_1_domination_sweep(families: &[Vec<Potential>], p: f64, q: f64, p_prime: f64) -> Result<DominationReport> {
    if !(q > 1.0) {
        return Err(Error::Precondition(format!("the domination sweep needs q > 1, got {q}")));
    }
    check_exponents(p, q)?;
    if !(p_prime >= 1.0) {
        return Err(Error::InvalidExponent(format!("p′ = {p_prime} < 1")));
    }
    let per_family = crate::par::map_indexed(families.len(), |f| -> Result<Vec<DominationPair>> {
        let seq = &families[f];
        let mut out = Vec::new();
        for j in 0..seq.len() {
            for k in j + 1..seq.len() {
                out.push(DominationPair {
                    family: f,
                    j,
                    k,
                    calabi: calabi_cauchy_stat(&seq[j], &seq[k], q)?,
                    mabuchi: mabuchi_cauchy_stat(&seq[j], &seq[k], p_prime)?,
                    sup: sup_distance(&seq[j], &seq[k]),
                });
            }
        }
        Ok(out)
    });
    let mut pairs = Vec::new();
    for r in per_family {
        pairs.extend(r?);
    }
    let counterexamples = pairs
        .iter()
        .filter(|p| p.calabi < CALABI_SMALL && p.mabuchi >= MABUCHI_LARGE)
        .copied()
        .collect();
    let modulus = (1..=8)
        .map(|e| {
            let th = 10f64.powi(-e);
            let sel = pairs.iter().filter(|p| p.calabi < th);
            let (m, s) = sel.fold((0.0_f64, 0.0_f64), |(m, s), p| (m.max(p.mabuchi), s.max(p.sup)));
            (th, m, s)
        })
        .collect();
    let pts: Vec<(f64, f64)> = pairs.iter().map(|p| (p.calabi, p.mabuchi)).collect();
    Ok(DominationReport {
        p,
        q,
        p_prime,
        modulus_exponent: log_log_slope(&pts),
        pairs,
        counterexamples,
        modulus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntropyTag {
    Convergent,
    Divergent,
}

#[derive(Debug, Clone)]
pub struct EquivalenceFamily {
    pub name: String,
    pub tag: EntropyTag,
    pub sequence: Vec<Potential>,
    pub limit: Potential,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyOutcome {
    pub name: String,
    pub tag: EntropyTag,
    pub co_vanish: bool,
    /// largest of the four statistics on the last element
    pub terminal_max: f64,
    pub entropy_drift: f64,
    /// `(vanishing, persisting)` statistic names when they decouple
    pub decoupling: Option<(String, String)>,
    pub diagnostics: EquivalenceDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceSweepReport {
    pub p_prime: f64,
    pub families: Vec<FamilyOutcome>,
}

/// Factor by which one statistic must shrink to count as decoupled from another.
pub const DECOUPLING_DROP: f64 = 100.0;

impl EquivalenceSweepReport {
    pub fn pair_stats(&self) -> Vec<PairStat> {
        let mut out = Vec::new();
        for f in &self.families {
            for mut s in f.diagnostics.pair_stats() {
                s.stat_name = format!("{}.{}", f.name, s.stat_name);
                out.push(s);
            }
        }
        out
    }

    pub fn verdicts(&self) -> VerdictTable {
        let mut t = VerdictTable::new("entropy-equivalence");
        let conv: Vec<&FamilyOutcome> = self.families.iter().filter(|f| f.tag == EntropyTag::Convergent).collect();
        let bad: Vec<&str> = conv.iter().filter(|f| !f.co_vanish).map(|f| f.name.as_str()).collect();
        t.check(
            "convergent_families_co_vanish",
            bad.is_empty(),
            Some(bad.len() as f64),
            format!("all four < {MABUCHI_LARGE:e} whenever one < {CALABI_SMALL:e}; failing: {bad:?}"),
        );
        let worst = conv.iter().map(|f| f.terminal_max).fold(0.0_f64, f64::max);
        t.check(
            "convergent_families_vanish",
            worst < MABUCHI_LARGE,
            Some(worst),
            "largest terminal statistic over convergent families",
        );
        let divergent: Vec<&FamilyOutcome> = self.families.iter().filter(|f| f.tag == EntropyTag::Divergent).collect();
        if !divergent.is_empty() {
            let found: Vec<String> = divergent
                .iter()
                .filter_map(|f| f.decoupling.as_ref().map(|(a, b)| format!("{}: {a} vanishes, {b} persists", f.name)))
                .collect();
            t.check(
                "divergent_family_decouples",
                !found.is_empty(),
                Some(found.len() as f64),
                found.join("; "),
            );
            for f in divergent {
                t.record(&format!("{}.entropy_drift", f.name), f.entropy_drift);
            }
        }
        t
    }
}

pub fn entropy_equivalence_sweep(families: &[EquivalenceFamily], p_prime: f64) -> Result<EquivalenceSweepReport> {
    let outcomes = crate::par::map_indexed(families.len(), |i| -> Result<FamilyOutcome> {
        let fam = &families[i];
        let d = equivalence_diagnostics(&fam.sequence, &fam.limit, p_prime)?;
        let terminal_max = d
            .rows
            .last()
            .map(|r| r.stats().into_iter().fold(0.0_f64, f64::max))
            .unwrap_or(0.0);
        Ok(FamilyOutcome {
            name: fam.name.clone(),
            tag: fam.tag,
            co_vanish: d.co_vanish(CALABI_SMALL, MABUCHI_LARGE),
            terminal_max,
            entropy_drift: d.entropy_drift,
            decoupling: d.decoupling(DECOUPLING_DROP).map(|(a, b)| (a.to_string(), b.to_string())),
            diagnostics: d,
        })
    });
    Ok(EquivalenceSweepReport {
        p_prime,
        families: outcomes.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::make_torus_geometry;
    use crate::experiments::families::{low_mode_potential, smooth_family};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn indices() -> Vec<usize> {
        (0..=10).map(|e| 1usize << e).collect()
    }

    #[test]
    fn q_at_most_one_is_rejected() {
        assert!(matches!(
            q_gt_1_domination_sweep(&[], 2.0, 1.0, 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn identical_sequence_gives_zeros() {
        let g = make_torus_geometry(16).unwrap();
        let u = low_mode_potential(&g, &mut ChaCha8Rng::seed_from_u64(2), 0.3, 1);
        let r = q_gt_1_domination_sweep(&[vec![u.clone(); 3]], 2.0, 2.0, 1.0).unwrap();
        assert!(r.pairs.iter().all(|p| p.calabi == 0.0 && p.mabuchi == 0.0 && p.sup == 0.0));
        assert!(r.counterexamples.is_empty());
    }

    #[test]
    fn smooth_families_are_dominated() {
        let g = make_torus_geometry(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fams: Vec<Vec<Potential>> = (0..3)
            .map(|_| {
                let u = low_mode_potential(&g, &mut rng, 0.3, 1);
                let phi = low_mode_potential(&g, &mut rng, 0.3, 1);
                smooth_family(&u, &phi, &indices(), 2.0).unwrap()
            })
            .collect();
        for q in [1.5, 2.0] {
            let r = q_gt_1_domination_sweep(&fams, 2.0, q, 1.0).unwrap();
            let t = r.verdicts();
            assert!(t.passed(), "{:?}", t.failures());
        }
    }

    #[test]
    fn convergent_and_constant_families() {
        let g = make_torus_geometry(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = low_mode_potential(&g, &mut rng, 0.3, 1);
        let phi = low_mode_potential(&g, &mut rng, 0.3, 1);
        let fams = vec![
            EquivalenceFamily {
                name: "smooth".into(),
                tag: EntropyTag::Convergent,
                sequence: smooth_family(&u, &phi, &indices(), 2.0).unwrap(),
                limit: u.clone(),
            },
            EquivalenceFamily {
                name: "constant".into(),
                tag: EntropyTag::Convergent,
                sequence: vec![u.clone(); 3],
                limit: u.clone(),
            },
        ];
        let r = entropy_equivalence_sweep(&fams, 1.0).unwrap();
        assert!(r.families[1].terminal_max == 0.0);
        let t = r.verdicts();
        assert!(t.passed(), "{:?}", t.failures());
    }
}
