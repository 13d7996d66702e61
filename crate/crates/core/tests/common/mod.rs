#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::TempDir;
use transit_fuse::config::{FrameConfig, LoadedConfig, Paths, RunConfig};
use transit_fuse::pipeline::{load_inputs, prepare, Command, Prepared, Run};
use transit_fuse::synth::{Sidecar, SynthConfig};

pub const FRAME: FrameConfig = FrameConfig { lat0: 60.0, lon0: 24.5 };

/// A config whose data files live in `dir/data` and outputs in `dir/out`.
pub fn run_config(synth: SynthConfig, seed: u64) -> RunConfig {
    let text = format!("seed = {seed}\n[frame]\nlat0 = {}\nlon0 = {}\n", FRAME.lat0, FRAME.lon0);
    let mut cfg = RunConfig::from_toml(&text).unwrap();
    cfg.paths = Paths {
        stations: "data/stations.csv".into(),
        apc: "data/apc.csv".into(),
        traces: "data/traces.csv".into(),
        out: "out".into(),
    };
    cfg.synth = synth;
    cfg
}

pub fn write_config(dir: &Path, cfg: &RunConfig) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, toml::to_string(cfg).unwrap()).unwrap();
    path
}

pub fn load(path: &Path) -> LoadedConfig {
    LoadedConfig::load(path).unwrap()
}

/// A generated world on disk.
pub struct World {
    pub dir: TempDir,
    pub config_path: PathBuf,
    pub seed: u64,
    pub sidecar: Sidecar,
}

impl World {
    pub fn generate(synth: SynthConfig, seed: u64) -> World {
        let dir = tempfile::tempdir().unwrap();
        let cfg = run_config(synth, seed);
        let config_path = write_config(dir.path(), &cfg);
        let run = Run::new(
            Command::Generate,
            load(&config_path),
            None,
            Some(dir.path().join("data")),
        )
        .unwrap();
        run.cmd_generate().unwrap();
        let text = std::fs::read_to_string(dir.path().join("data/sidecar.json")).unwrap();
        let sidecar: Sidecar = serde_json::from_str(&text).unwrap();
        World {
            dir,
            config_path,
            seed,
            sidecar,
        }
    }

    pub fn config(&self) -> RunConfig {
        load(&self.config_path).config
    }

    pub fn prepared(&self) -> Prepared {
        let cfg = self.config();
        prepare(load_inputs(&cfg).unwrap(), &cfg, self.seed).unwrap()
    }
}

/// Writes straight to the process stderr so the line shows even when the
/// test harness captures output.
pub fn verdict(n: &str, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n} [{status}] {name}: {detail}");
}
