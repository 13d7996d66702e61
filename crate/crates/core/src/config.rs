//! Run configuration, read from a single TOML file.
//!
//! ```toml
//! seed = 42
//!
//! [paths]            # relative to the config file
//! stations = "data/stations.csv"
//! apc = "data/apc.csv"
//! traces = "data/traces.csv"
//! out = "out"
//!
//! [frame]
//! lat0 = 60.0
//! lon0 = 24.5
//!
//! [calendar]
//! utc_offset_minutes = 180
//!
//! [chains]
//! dwell_gap_minutes = 30
//!
//! [scaling]
//! mode = "apc"       # or "opt_in"
//! opt_in_rate = 0.025
//!
//! [forest]
//! n_trees = 500
//! min_leaf = 2
//!
//! [fusion]
//! importance_repeats = 10
//! pdp_grid = 50
//!
//! [synth]
//! journeys_per_day = 2000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chains::DEFAULT_DWELL_GAP_SECS;
use crate::fusion::{Hyperparameters, DEFAULT_PDP_GRID};
use crate::model::{Calendar, ProjectionFrame};
use crate::synth::SynthConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub stations: PathBuf,
    pub apc: PathBuf,
    pub traces: PathBuf,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            stations: "stations.csv".into(),
            apc: "apc.csv".into(),
            traces: "traces.csv".into(),
            out: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub lat0: f64,
    pub lon0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalendarConfig {
    pub utc_offset_minutes: i32,
}

impl Default for CalendarConfig {
    fn default() -> Self {
        CalendarConfig {
            utc_offset_minutes: 180,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainsConfig {
    pub dwell_gap_minutes: u32,
}

impl Default for ChainsConfig {
    fn default() -> Self {
        ChainsConfig {
            dwell_gap_minutes: (DEFAULT_DWELL_GAP_SECS / 60) as u32,
        }
    }
}

/// How trace OD counts are scaled to population flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// Each OD row is spread over the counter boardings at its origin.
    Apc,
    /// Every count is divided by the opt-in rate.
    OptIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingConfig {
    pub mode: ScalingMode,
    pub opt_in_rate: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            mode: ScalingMode::Apc,
            opt_in_rate: 0.025,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub importance_repeats: usize,
    pub pdp_grid: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            importance_repeats: 10,
            pdp_grid: DEFAULT_PDP_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Drives synthesis, anonymization keys, bootstrap draws and shuffles.
    /// May instead be given on the command line.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: Paths,
    pub frame: FrameConfig,
    #[serde(default)]
    pub calendar: CalendarConfig,
    #[serde(default)]
    pub chains: ChainsConfig,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default)]
    pub forest: Hyperparameters,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub synth: SynthConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.frame()?;
        self.calendar()?;
        if self.chains.dwell_gap_minutes == 0 {
            return Err(Error::Config("chains.dwell_gap_minutes must be positive".into()));
        }
        let p = self.scaling.opt_in_rate;
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Config("scaling.opt_in_rate must be in (0, 1]".into()));
        }
        self.forest.validate()?;
        if self.fusion.importance_repeats == 0 {
            return Err(Error::Config("fusion.importance_repeats must be at least 1".into()));
        }
        if self.fusion.pdp_grid < 2 {
            return Err(Error::Config("fusion.pdp_grid must be at least 2".into()));
        }
        self.synth.validate()
    }

    pub fn frame(&self) -> Result<ProjectionFrame> {
        ProjectionFrame::new(self.frame.lat0, self.frame.lon0)
    }

    pub fn calendar(&self) -> Result<Calendar> {
        Calendar::with_offset_minutes(self.calendar.utc_offset_minutes)
    }

    pub fn dwell_gap_secs(&self) -> i64 {
        i64::from(self.chains.dwell_gap_minutes) * 60
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.paths.stations,
            &mut self.paths.apc,
            &mut self.paths.traces,
            &mut self.paths.out,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// A parsed config together with the hash of its exact bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub text: String,
    pub sha256: String,
}

impl LoadedConfig {
    pub fn from_text(text: String, base: &Path) -> Result<Self> {
        let mut config = RunConfig::from_toml(&text)?;
        config.resolve_paths(base);
        Ok(LoadedConfig {
            sha256: sha256_hex(text.as_bytes()),
            config,
            text,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(text, base)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
