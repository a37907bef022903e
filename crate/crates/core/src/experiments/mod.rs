//! Sequence constructions separating the Calabi and Mabuchi topologies, the
//! equivalence sweeps for finite-entropy sequences, and verdict tables.
//!
//! Singular objects cannot live on a finite grid, so each construction is a
//! resolution-indexed trend whose limit behaviour is checked across resolutions.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backend::io::GridFile;
use crate::backend::Potential;
use crate::error::Result;
use crate::finsler::{write_pair_csv, PairStat};

pub mod families;
mod max_smoothing;
mod spike;
pub mod suites;
mod sweeps;

pub use max_smoothing::{
    collar_mass, level_set_charge, max_smoothing_family, smooth_max_potential, transversality, MaxSmoothingReport,
};
pub use spike::{spike_density_family, SpikeConfig, SpikeProfile, SpikeReport};
pub use sweeps::{
    entropy_equivalence_sweep, q_gt_1_domination_sweep, DominationReport, EntropyTag, EquivalenceFamily,
    EquivalenceSweepReport,
};

/// One machine-checkable claim about an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    /// measured value behind the claim, when there is one
    pub value: Option<f64>,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, value: Option<f64>, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.to_string(),
            passed,
            value: value.filter(|v| v.is_finite()),
            detail: detail.into(),
        }
    }
}

/// Verdicts plus recorded (not asserted) measurements.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VerdictTable {
    pub experiment: String,
    pub verdicts: Vec<Verdict>,
    pub recorded: std::collections::BTreeMap<String, f64>,
}

impl VerdictTable {
    pub fn new(experiment: &str) -> Self {
        VerdictTable {
            experiment: experiment.to_string(),
            ..Default::default()
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, value: Option<f64>, detail: impl Into<String>) -> bool {
        self.verdicts.push(Verdict::new(name, passed, value, detail));
        passed
    }

    pub fn record(&mut self, name: &str, value: f64) {
        self.recorded.insert(name.to_string(), value);
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| !v.passed).collect()
    }

    pub fn merge(&mut self, prefix: &str, other: VerdictTable) {
        for mut v in other.verdicts {
            v.name = format!("{prefix}.{}", v.name);
            self.verdicts.push(v);
        }
        for (k, v) in other.recorded {
            self.recorded.insert(format!("{prefix}.{k}"), v);
        }
    }
}

/// A produced sequence of potentials with its generator parameters and
/// statistics table.
#[derive(Debug, Clone)]
pub struct SequenceExperiment {
    pub name: String,
    pub params: serde_json::Value,
    pub sequence: Vec<Potential>,
    pub stats: Vec<PairStat>,
}

impl SequenceExperiment {
    /// Writes `sequence/NNNN.kgrid` snapshots (every `stride`-th element) and
    /// `stats.csv` into `dir`.
    pub fn write(&self, dir: &Path, stride: usize) -> Result<()> {
        let seq_dir = dir.join("sequence");
        fs::create_dir_all(&seq_dir)?;
        for (i, u) in self.sequence.iter().enumerate().step_by(stride.max(1)) {
            let g = u.geometry();
            let grid = GridFile::new(g.kind(), g.resolution(), g.volume(), u.values().to_vec())?;
            grid.write_binary(BufWriter::new(fs::File::create(seq_dir.join(format!("{i:04}.kgrid")))?))?;
        }
        write_pair_csv(BufWriter::new(fs::File::create(dir.join("stats.csv"))?), &self.stats)
    }
}

pub(crate) fn push_stat(stats: &mut Vec<PairStat>, j: usize, k: usize, name: &str, value: f64) {
    stats.push(PairStat {
        j,
        k,
        stat_name: name.to_string(),
        value,
    });
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..20).map(|k| (k as f64, 3.0 * (k as f64).powf(-1.5))).collect();
        assert!((log_log_slope(&pts).unwrap() + 1.5).abs() < 1e-12);
        assert!(log_log_slope(&[(1.0, 1.0)]).is_none());
    }

    #[test]
    fn table_merging() {
        let mut a = VerdictTable::new("a");
        a.check("x", true, Some(1.0), "");
        let mut b = VerdictTable::new("b");
        b.check("y", false, Some(f64::NAN), "nan values are dropped");
        b.record("r", 2.0);
        a.merge("b", b);
        assert!(!a.passed());
        assert_eq!(a.failures()[0].name, "b.y");
        assert_eq!(a.failures()[0].value, None);
        assert_eq!(a.recorded["b.r"], 2.0);
    }
}
