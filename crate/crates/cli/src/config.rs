//! Run configuration: one TOML file, optionally patched by command-line overrides.
//!
//! Every field except `experiment` is optional; absent fields fall back to the
//! experiment's own defaults, so a resolved config reproduces a run exactly.

use std::fs;
use std::path::{Path, PathBuf};

use calabi_lab::backend::{make_geometry, BackendKind};
use calabi_lab::numeric::exponent_serde;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{usage, CliResult};

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub exponents: ExponentSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<BackendKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

/// Absent exponents take the experiment's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentSection {
    /// `"inf"` is accepted
    #[serde(default, with = "opt_exponent", skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_prime: Option<f64>,
}

mod opt_exponent {
    use calabi_lab::numeric::exponent_serde;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match p {
            Some(v) => exponent_serde::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "exponent_serde")] f64);
        Ok(Some(Wrap::deserialize(d)?.0))
    }
}

/// Resolved exponent triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exponents {
    #[serde(with = "exponent_serde")]
    pub p: f64,
    pub q: f64,
    pub p_prime: f64,
}

impl Exponents {
    pub const fn new(p: f64, q: f64, p_prime: f64) -> Self {
        Exponents { p, q, p_prime }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// first smoothing parameter; later ones halve
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// number of smoothing parameters
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_count: Option<usize>,
    /// largest shell index of the spike family
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// random families or pairs, for the sweeps that draw them
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<usize>,
}

impl RunConfig {
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.experiment))
    }

    pub fn snapshot_stride(&self) -> usize {
        self.output.snapshot_stride.unwrap_or(1).max(1)
    }

    pub fn exponents(&self, defaults: Exponents) -> Exponents {
        Exponents {
            p: self.exponents.p.unwrap_or(defaults.p),
            q: self.exponents.q.unwrap_or(defaults.q),
            p_prime: self.exponents.p_prime.unwrap_or(defaults.p_prime),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Exponent order, resolution range and schedule sanity. Runs before any
    /// computation; the output directory is checked separately when it is created.
    pub fn validate(&self, defaults: Exponents, default_kind: BackendKind) -> CliResult<()> {
        let e = self.exponents(defaults);
        if !(e.q >= 1.0 && e.q <= e.p) {
            return Err(usage(format!("exponents must satisfy 1 <= q <= p, got p = {}, q = {}", e.p, e.q)));
        }
        if !(e.p_prime >= 1.0 && e.p_prime.is_finite()) {
            return Err(usage(format!("p_prime must be finite and at least 1, got {}", e.p_prime)));
        }
        if let Some(n) = self.backend.resolution {
            if n > 4096 {
                return Err(usage(format!("resolution {n} exceeds the supported maximum 4096")));
            }
            let kind = self.backend.kind.unwrap_or(default_kind);
            make_geometry(kind, n).map_err(|e| usage(e.to_string()))?;
        }
        let s = &self.schedule;
        for (name, v) in [("eps", s.eps), ("dt", s.dt)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(usage(format!("schedule.{name} must be positive, got {v}")));
                }
            }
        }
        if let Some(t) = s.t_end {
            if !(t > 0.0 && t.is_finite()) {
                return Err(usage(format!("schedule.t_end must be positive, got {t}")));
            }
        }
        if s.eps_count.is_some_and(|c| c < 2) {
            return Err(usage("schedule.eps_count must be at least 2"));
        }
        if s.k_max.is_some_and(|k| k < 2) {
            return Err(usage("schedule.k_max must be at least 2"));
        }
        if s.trials == Some(0) {
            return Err(usage("schedule.trials must be positive"));
        }
        Ok(())
    }
}

/// Creates `dir` and proves it writable.
pub fn prepare_output_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| usage(format!("output directory {} is not writable: {e}", dir.display())))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| usage(format!("output directory {} is not writable: {e}", dir.display())))?;
    fs::remove_file(probe)?;
    Ok(())
}

/// A dotted-key assignment, e.g. `exponents.q=1.5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Override {
    pub key: String,
    pub value: String,
}

impl Override {
    pub fn parse(s: &str) -> CliResult<Self> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| usage(format!("override `{s}` is not KEY=VALUE")))?;
        let key = k.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(usage(format!("override `{s}` has an empty key segment")));
        }
        Ok(Override {
            key: key.to_string(),
            value: v.trim().to_string(),
        })
    }

    /// The value as TOML when it parses as one, else as a bare string.
    fn toml_value(&self) -> Value {
        format!("v = {}", self.value)
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(self.value.clone()))
    }

    fn apply(&self, table: &mut Table) -> CliResult<()> {
        let mut parts: Vec<&str> = self.key.split('.').collect();
        let last = parts.pop().expect("nonempty key");
        let mut t = table;
        for part in parts {
            let entry = t.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
            t = entry
                .as_table_mut()
                .ok_or_else(|| usage(format!("override key `{}`: `{part}` is not a section", self.key)))?;
        }
        t.insert(last.to_string(), self.toml_value());
        Ok(())
    }
}

/// Parses the raw config text and applies overrides in order. Validation needs
/// the experiment's defaults and happens in the registry.
pub fn resolve(raw: &str, overrides: &[Override]) -> CliResult<RunConfig> {
    let mut table: Table = raw.parse().map_err(|e| usage(format!("config is not valid TOML: {e}")))?;
    for o in overrides {
        o.apply(&mut table)?;
    }
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| usage(format!("invalid config: {}", e.message())))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONES: Exponents = Exponents::new(1.0, 1.0, 1.0);

    fn set(s: &str) -> Override {
        Override::parse(s).unwrap()
    }

    fn checked(raw: &str, o: &[Override]) -> CliResult<RunConfig> {
        let cfg = resolve(raw, o)?;
        cfg.validate(ONES, BackendKind::FlatTorus)?;
        Ok(cfg)
    }

    #[test]
    fn overrides_patch_nested_keys() {
        let raw = "experiment = \"kr-criterion\"\n[exponents]\np = 2\n";
        let cfg = checked(raw, &[set("exponents.q=1.5"), set("backend.kind=round-p1"), set("seed=7")]).unwrap();
        let e = cfg.exponents(ONES);
        assert_eq!((e.p, e.q, e.p_prime), (2.0, 1.5, 1.0));
        assert_eq!(cfg.backend.kind, Some(BackendKind::RoundP1));
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn infinite_p_round_trips() {
        let cfg = checked("experiment = \"x\"\n[exponents]\np = \"inf\"\n", &[]).unwrap();
        assert!(cfg.exponents(ONES).p.is_infinite());
        let again = checked(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        for raw in [
            "experiment = \"x\"\n[exponents]\np = 1\nq = 2\n",
            "experiment = \"x\"\n[exponents]\nq = 0.5\n",
            "experiment = \"x\"\n[backend]\nkind = \"flat-torus\"\nresolution = 9\n",
            "experiment = \"x\"\n[schedule]\ndt = -1\n",
            "experiment = \"x\"\nbogus = 1\n",
            "seed = 1\n",
        ] {
            assert!(checked(raw, &[]).is_err(), "{raw}");
        }
        assert!(Override::parse("novalue").is_err());
        assert!(Override::parse("a..b=1").is_err());
        assert!(checked("experiment = \"x\"\nseed = 1\n", &[set("seed.x=1")]).is_err());
    }
}
