//! Trajectory directories: `metadata.json` plus one grid file per stored state.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FlowKind, FlowTrajectory, StepDiagnostics};
use crate::backend::io::GridFile;
use crate::backend::{make_geometry, BackendKind, Potential};
use crate::error::{Error, Result};

pub const METADATA_FILE: &str = "metadata.json";
pub const SCHEME: &str = "sbdf2-imex";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub index: usize,
    pub time: f64,
    pub file: String,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryMetadata {
    pub backend: BackendKind,
    pub resolution: usize,
    pub flow: FlowKind,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: String,
    pub seed: Option<u64>,
    /// stride between written snapshots, in stored states
    pub snapshot_stride: usize,
    pub snapshots: Vec<Snapshot>,
}

impl FlowTrajectory {
    /// Writes every `stride`-th stored state (and the last one) to `dir`.
    pub fn save(&self, dir: &Path, stride: usize, seed: Option<u64>) -> Result<TrajectoryMetadata> {
        fs::create_dir_all(dir)?;
        let g = self.geometry();
        let stride = stride.max(1);
        let last = self.states.len() - 1;
        let mut snapshots = Vec::new();
        for i in (0..self.states.len()).filter(|i| i % stride == 0 || *i == last) {
            let file = format!("state_{i:06}.kgrid");
            let grid = GridFile::new(g.kind(), g.resolution(), g.volume(), self.states[i].values().to_vec())?;
            grid.write_binary(BufWriter::new(File::create(dir.join(&file))?))?;
            snapshots.push(Snapshot {
                index: i,
                time: self.times[i],
                file,
                diagnostics: self.diagnostics[i],
            });
        }
        let meta = TrajectoryMetadata {
            backend: g.kind(),
            resolution: g.resolution(),
            flow: self.kind,
            dt: self.dt,
            t_end: self.t_end,
            scheme: SCHEME.into(),
            seed,
            snapshot_stride: stride,
            snapshots,
        };
        fs::write(dir.join(METADATA_FILE), serde_json::to_string_pretty(&meta)?)?;
        Ok(meta)
    }

    /// Reads the snapshots written by [`FlowTrajectory::save`].
    pub fn load(dir: &Path) -> Result<(FlowTrajectory, TrajectoryMetadata)> {
        let meta: TrajectoryMetadata = serde_json::from_str(&fs::read_to_string(dir.join(METADATA_FILE))?)?;
        let geometry = make_geometry(meta.backend, meta.resolution)?;
        let mut states = Vec::with_capacity(meta.snapshots.len());
        for s in &meta.snapshots {
            let grid = GridFile::read_binary(BufReader::new(File::open(dir.join(&s.file))?))?;
            if grid.kind != meta.backend || grid.resolution != meta.resolution {
                return Err(Error::Format(format!("{} does not match the metadata geometry", s.file)));
            }
            states.push(Potential::new(geometry.clone(), grid.values)?);
        }
        if states.is_empty() {
            return Err(Error::Format("trajectory directory holds no snapshots".into()));
        }
        let traj = FlowTrajectory {
            kind: meta.flow,
            dt: meta.dt,
            t_end: meta.t_end,
            times: meta.snapshots.iter().map(|s| s.time).collect(),
            states,
            diagnostics: meta.snapshots.iter().map(|s| s.diagnostics).collect(),
        };
        Ok((traj, meta))
    }
}

#[cfg(test)]
mod tests {
    use crate::backend::{make_p1_geometry, random_potential};
    use crate::flows::{kr_flow_run, FlowControls, FlowTrajectory};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn save_and_load_round_trip() {
        let g = make_p1_geometry(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u0 = random_potential(&g, &mut rng, 0.3);
        let t = kr_flow_run(&u0, 0.05, 1.0, FlowControls::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let meta = t.save(dir.path(), 3, Some(8)).unwrap();
        assert_eq!(meta.snapshots.len(), 8);
        let (back, meta2) = FlowTrajectory::load(dir.path()).unwrap();
        assert_eq!(meta2.seed, Some(8));
        assert_eq!(back.states.last().unwrap().values(), t.last().values());
        assert_eq!(back.times[1], t.times[3]);
    }
}
