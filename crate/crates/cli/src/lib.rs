//! Command-line runner for the calabi-lab experiments.
//!
//! A run directory holds `params.json` (the raw config text byte for byte, the
//! overrides, the resolved config and the code version), `config.toml` (the
//! resolved config), `stats.csv`, `verdict.json`, plus per-experiment artifacts.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use calabi_lab::experiments::{Verdict, VerdictTable};
use calabi_lab::finsler::write_pair_csv;
use serde::{Deserialize, Serialize};

pub mod config;
pub mod error;
pub mod registry;

pub use config::{Override, RunConfig};
pub use error::{CliError, CliResult};

use error::usage;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const PARAMS_FILE: &str = "params.json";
pub const VERDICT_FILE: &str = "verdict.json";
pub const STATS_FILE: &str = "stats.csv";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Params {
    pub experiment: String,
    pub version: String,
    /// path of the config file, when one was given
    pub config_path: Option<PathBuf>,
    /// the config file exactly as read
    pub config_text: String,
    pub overrides: Vec<Override>,
    /// the config after overrides; re-running it reproduces the directory
    pub resolved: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictFile {
    pub passed: bool,
    pub failures: Vec<String>,
    #[serde(flatten)]
    pub table: VerdictTable,
}

/// Where the config text comes from.
#[derive(Debug, Clone, Default)]
pub struct RunRequest {
    pub experiment: Option<String>,
    pub config_path: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
    pub sets: Vec<String>,
}

/// Result of a completed run.
#[derive(Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub verdicts: VerdictFile,
}

impl RunReport {
    pub fn failures(&self) -> Vec<&Verdict> {
        self.verdicts.table.failures()
    }
}

fn read_request(req: &RunRequest) -> CliResult<(String, Vec<Override>)> {
    let raw = match &req.config_path {
        Some(p) => fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?,
        None => String::new(),
    };
    // flags are sugar for overrides; explicit --set entries come last and win
    let mut overrides = Vec::new();
    if let Some(e) = &req.experiment {
        overrides.push(Override { key: "experiment".into(), value: format!("{e:?}") });
    }
    if let Some(s) = req.seed {
        overrides.push(Override { key: "seed".into(), value: s.to_string() });
    }
    if let Some(n) = req.resolution {
        overrides.push(Override { key: "backend.resolution".into(), value: n.to_string() });
    }
    if let Some(o) = &req.out {
        overrides.push(Override { key: "output.dir".into(), value: format!("{:?}", o.display().to_string()) });
    }
    for s in &req.sets {
        overrides.push(Override::parse(s)?);
    }
    Ok((raw, overrides))
}

/// Validates everything, then runs and writes the artifacts.
pub fn run(req: &RunRequest) -> CliResult<RunReport> {
    let (raw, overrides) = read_request(req)?;
    let cfg = config::resolve(&raw, &overrides)?;
    let params = Params {
        experiment: cfg.experiment.clone(),
        version: VERSION.to_string(),
        config_path: req.config_path.clone(),
        config_text: raw,
        overrides,
        resolved: cfg.to_toml(),
    };
    execute(&cfg, &params, &cfg.output_dir())
}

fn execute(cfg: &RunConfig, params: &Params, dir: &Path) -> CliResult<RunReport> {
    let exp = registry::find(&cfg.experiment)?;
    cfg.validate(exp.default_exponents, exp.default_kind)?;
    config::prepare_output_dir(dir)?;
    fs::write(dir.join(PARAMS_FILE), serde_json::to_string_pretty(params)?)?;
    fs::write(dir.join(CONFIG_FILE), &params.resolved)?;
    log::info!("running {} into {}", exp.name, dir.display());
    let outcome = exp.run(cfg, dir)?;
    write_pair_csv(BufWriter::new(fs::File::create(dir.join(STATS_FILE))?), &outcome.stats)?;
    let verdicts = VerdictFile {
        passed: outcome.table.passed(),
        failures: outcome.table.failures().iter().map(|v| v.name.clone()).collect(),
        table: outcome.table,
    };
    fs::write(dir.join(VERDICT_FILE), serde_json::to_string_pretty(&verdicts)?)?;
    Ok(RunReport {
        dir: dir.to_path_buf(),
        verdicts,
    })
}

/// Outcome of `verify`.
#[derive(Debug)]
pub struct VerifyReport {
    pub stats_identical: bool,
    /// verdicts whose pass flag differs between the stored and the fresh run
    pub verdict_mismatches: Vec<String>,
    pub stored: VerdictFile,
    pub fresh: VerdictFile,
}

impl VerifyReport {
    pub fn reproduced(&self) -> bool {
        self.stats_identical && self.verdict_mismatches.is_empty()
    }
}

/// Re-runs a directory from its resolved config into a scratch directory and
/// compares `stats.csv` byte for byte and the verdicts flag by flag.
pub fn verify(dir: &Path) -> CliResult<VerifyReport> {
    let read = |name: &str| {
        fs::read(dir.join(name)).map_err(|e| usage(format!("{} is not a run directory: {name}: {e}", dir.display())))
    };
    let malformed = |e: serde_json::Error| usage(format!("malformed run directory {}: {e}", dir.display()));
    let params: Params = serde_json::from_slice(&read(PARAMS_FILE)?).map_err(malformed)?;
    let stored: VerdictFile = serde_json::from_slice(&read(VERDICT_FILE)?).map_err(malformed)?;
    let stats = read(STATS_FILE)?;
    let cfg = config::resolve(&params.resolved, &[])?;
    let scratch = tempfile::tempdir()?;
    let fresh = execute(&cfg, &params, scratch.path())?;
    let fresh_stats = fs::read(scratch.path().join(STATS_FILE))?;
    let mut verdict_mismatches = Vec::new();
    for v in &stored.table.verdicts {
        match fresh.verdicts.table.verdicts.iter().find(|w| w.name == v.name) {
            Some(w) if w.passed == v.passed => {}
            _ => verdict_mismatches.push(v.name.clone()),
        }
    }
    if fresh.verdicts.table.verdicts.len() != stored.table.verdicts.len() {
        verdict_mismatches.push("verdict count".into());
    }
    Ok(VerifyReport {
        stats_identical: stats == fresh_stats,
        verdict_mismatches,
        stored,
        fresh: fresh.verdicts,
    })
}

pub fn list() -> String {
    registry::registry()
        .iter()
        .map(|e| format!("{:<22}{}\n", e.name, e.summary))
        .collect()
}

pub fn describe(name: &str) -> CliResult<String> {
    if name == "all" {
        return Ok(registry::registry()
            .iter()
            .map(|e| e.describe())
            .collect::<Vec<_>>()
            .join("\n"));
    }
    Ok(registry::find(name)?.describe())
}
