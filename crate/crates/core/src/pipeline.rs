//! Stage orchestration shared by the command line and the tests.
//!
//! Everything is in memory: [`load_inputs`] reads files, [`prepare`] turns
//! raw records into weekday train-leg contexts, and the `run_*` functions
//! compute each stage. The `cmd_*` functions add file output.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::chains::{assemble_chains, extract_train_contexts, write_contexts, TrainLegContext};
use crate::config::{LoadedConfig, RunConfig, ScalingMode};
use crate::coverage::{build_profiles, compile_cell_flows, write_profiles, StationCellFlows, StationProfile};
use crate::fusion::{
    build_features, oob_permutation_importance, partial_dependence, permutation_importance, split_frequency_importance,
    station_totals, write_importance, write_pdp, FeatureMatrix, Forest, Target, PDP_HEADER,
};
use crate::ingest::{
    anonymize, filter_weekdays, parse_apc_file, parse_station_file, parse_trace_file, write_apc, write_stations,
    write_traces, RawLegRecord,
};
use crate::model::{ApcEvent, Calendar, StationRegistry};
use crate::patterns::{
    build_od_over, flow_distribution, scale_od, travel_distance_distribution, travel_time_distribution, write_od,
    write_scaled_od, DistributionSummary, OdMatrix, ScaledOd,
};
use crate::report::{strip_manifest, Manifest, OutputDir, TOOL, VERSION};
use crate::stats::{validate_all, write_validation, ValidationReport};
use crate::synth;
use crate::warnings::Warnings;
use crate::{Error, Result};

/// Record counts of one run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunCounts {
    pub stations: u64,
    pub apc_rows: u64,
    pub weekday_apc_rows: u64,
    pub trace_rows: u64,
    pub chains: u64,
    pub train_legs: u64,
    pub weekday_train_legs: u64,
}

/// Inputs ready for analysis: weekday counter rows and weekday train-leg
/// contexts.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub registry: StationRegistry,
    pub calendar: Calendar,
    pub apc: Vec<ApcEvent>,
    pub contexts: Vec<TrainLegContext>,
    pub counts: RunCounts,
    pub warnings: Warnings,
}

pub struct Inputs {
    pub registry: StationRegistry,
    pub apc: Vec<ApcEvent>,
    pub trace: Vec<RawLegRecord>,
    pub warnings: Warnings,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let calendar = cfg.calendar()?;
    let registry = parse_station_file(&cfg.paths.stations)?;
    let apc = parse_apc_file(&cfg.paths.apc, &calendar, Some(&registry))?;
    let mut warnings = Warnings::default();
    let trace = parse_trace_file(&cfg.paths.traces, &calendar, &mut warnings)?;
    Ok(Inputs {
        registry,
        apc,
        trace,
        warnings,
    })
}

/// Anonymizes and chains the whole trace, then keeps weekday train legs
/// (by boarding time) and weekday counter rows.
pub fn prepare(inputs: Inputs, cfg: &RunConfig, seed: u64) -> Result<Prepared> {
    let calendar = cfg.calendar()?;
    let frame = cfg.frame()?;
    let mut warnings = inputs.warnings;
    let mut counts = RunCounts {
        stations: inputs.registry.len() as u64,
        apc_rows: inputs.apc.len() as u64,
        trace_rows: inputs.trace.len() as u64,
        ..RunCounts::default()
    };
    let legs = anonymize(&inputs.trace, seed, &frame)?;
    let chains = assemble_chains(legs, cfg.dwell_gap_secs(), &mut warnings)?;
    counts.chains = chains.len() as u64;
    let all = extract_train_contexts(&chains, &mut warnings);
    counts.train_legs = all.len() as u64;
    let contexts: Vec<TrainLegContext> = all.into_iter().filter(|c| calendar.is_weekday(c.board_time)).collect();
    counts.weekday_train_legs = contexts.len() as u64;
    for c in &contexts {
        for s in [&c.board_station, &c.alight_station] {
            if !inputs.registry.contains(s) {
                return Err(Error::StationNotInRegistry(s.clone()));
            }
        }
    }
    let apc = filter_weekdays(inputs.apc, &calendar);
    counts.weekday_apc_rows = apc.len() as u64;
    Ok(Prepared {
        registry: inputs.registry,
        calendar,
        apc,
        contexts,
        counts,
        warnings,
    })
}

pub fn run_validation(p: &mut Prepared) -> Result<Vec<ValidationReport>> {
    validate_all(&p.contexts, &p.apc, &p.calendar, &mut p.warnings)
}

#[derive(Debug, Clone, Serialize)]
pub struct PatternsResult {
    pub od: OdMatrix,
    pub scaled: ScaledOd,
    pub travel_time: DistributionSummary,
    pub travel_distance: DistributionSummary,
    pub flows: DistributionSummary,
}

pub fn run_patterns(p: &mut Prepared, cfg: &RunConfig) -> Result<PatternsResult> {
    let od = build_od_over(&p.contexts, p.registry.ids());
    check_od(&od, &p.contexts)?;
    let scaled = match cfg.scaling.mode {
        ScalingMode::Apc => {
            let boardings: BTreeMap<String, f64> = station_totals(&p.apc)
                .into_iter()
                .map(|(k, v)| (k, v.boardings))
                .collect();
            let scaled = scale_od(&od, &boardings, &mut p.warnings)?;
            check_scaled(&od, &scaled, &boardings)?;
            scaled
        }
        ScalingMode::OptIn => ScaledOd {
            stations: od.stations.clone(),
            flows: od
                .counts
                .iter()
                .map(|row| row.iter().map(|&c| c as f64 / cfg.scaling.opt_in_rate).collect())
                .collect(),
        },
    };
    Ok(PatternsResult {
        travel_time: travel_time_distribution(&p.contexts, &mut p.warnings),
        travel_distance: travel_distance_distribution(&p.contexts, &p.registry)?,
        flows: flow_distribution(&od),
        od,
        scaled,
    })
}

/// Row and column sums of the OD matrix must equal independently recounted
/// boardings and alightings.
fn check_od(od: &OdMatrix, contexts: &[TrainLegContext]) -> Result<()> {
    let mut b: BTreeMap<&str, u64> = BTreeMap::new();
    let mut a: BTreeMap<&str, u64> = BTreeMap::new();
    for c in contexts {
        *b.entry(&c.board_station).or_default() += 1;
        *a.entry(&c.alight_station).or_default() += 1;
    }
    for ((s, row), col) in od.stations.iter().zip(od.row_sums()).zip(od.column_sums()) {
        let (eb, ea) = (
            b.get(s.as_str()).copied().unwrap_or(0),
            a.get(s.as_str()).copied().unwrap_or(0),
        );
        if row != eb || col != ea {
            return Err(Error::Invariant(format!(
                "OD sums for {s} ({row}, {col}) differ from trace boardings/alightings ({eb}, {ea})"
            )));
        }
    }
    if od.total() != contexts.len() as u64 {
        return Err(Error::Invariant("OD total differs from number of train legs".into()));
    }
    Ok(())
}

fn check_scaled(od: &OdMatrix, scaled: &ScaledOd, boardings: &BTreeMap<String, f64>) -> Result<()> {
    for ((s, row), counts) in scaled.stations.iter().zip(&scaled.flows).zip(&od.counts) {
        if counts.iter().sum::<u64>() == 0 {
            continue;
        }
        let want = boardings.get(s).copied().unwrap_or(0.0);
        let got: f64 = row.iter().sum();
        if (got - want).abs() > 1e-9 * want.max(1.0) {
            return Err(Error::Invariant(format!(
                "scaled OD row {s} sums to {got}, expected {want}"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageResult {
    pub profiles: Vec<StationProfile>,
    pub cell_flows: BTreeMap<String, StationCellFlows>,
}

pub fn run_coverage(p: &Prepared, cfg: &RunConfig) -> Result<CoverageResult> {
    Ok(CoverageResult {
        profiles: build_profiles(&p.contexts, &p.registry, &cfg.frame()?)?,
        cell_flows: compile_cell_flows(&p.contexts, p.registry.ids()),
    })
}

/// Fitted model and its interpretation for one target.
#[derive(Debug, Clone)]
pub struct TargetFit {
    pub target: Target,
    pub forest: Forest,
    pub r_squared: f64,
    pub oob_r_squared: Option<f64>,
    pub permutation_importance: Vec<f64>,
    pub oob_permutation_importance: Option<Vec<f64>>,
    pub split_frequency: Vec<f64>,
    /// One curve per feature, in column order.
    pub pdp: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct FusionResult {
    pub features: FeatureMatrix,
    pub fits: Vec<TargetFit>,
}

pub fn fit_target(m: &FeatureMatrix, target: Target, cfg: &RunConfig, seed: u64) -> Result<TargetFit> {
    let y = m.target(target);
    let forest = Forest::fit(&m.x, y, &cfg.forest, seed)?;
    let repeats = cfg.fusion.importance_repeats;
    let oob = forest.has_oob();
    let pdp = (0..m.feature_names.len())
        .map(|f| partial_dependence(&forest, &m.x, f, cfg.fusion.pdp_grid))
        .collect::<Result<_>>()?;
    Ok(TargetFit {
        target,
        r_squared: forest.r_squared(&m.x, y)?,
        oob_r_squared: if oob {
            Some(forest.oob_r_squared(&m.x, y)?)
        } else {
            None
        },
        permutation_importance: permutation_importance(&forest, &m.x, y, repeats, seed)?,
        oob_permutation_importance: if oob {
            Some(oob_permutation_importance(&forest, &m.x, y, repeats, seed)?)
        } else {
            None
        },
        split_frequency: split_frequency_importance(&forest),
        pdp,
        forest,
    })
}

pub fn run_fusion(p: &mut Prepared, profiles: &[StationProfile], cfg: &RunConfig, seed: u64) -> Result<FusionResult> {
    let features = build_features(profiles, &station_totals(&p.apc), &mut p.warnings)?;
    let fits = Target::BOTH
        .iter()
        .map(|&t| fit_target(&features, t, cfg, seed))
        .collect::<Result<_>>()?;
    Ok(FusionResult { features, fits })
}

/// Command names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Generate,
    Validate,
    Patterns,
    Coverage,
    Fuse,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Validate => "validate",
            Command::Patterns => "patterns",
            Command::Coverage => "coverage",
            Command::Fuse => "fuse",
            Command::Report => "report",
        }
    }
}

/// Resolved settings for one invocation.
pub struct Run {
    pub loaded: LoadedConfig,
    pub seed: u64,
    pub manifest: Manifest,
}

impl Run {
    /// `seed` and `out` override the config file.
    pub fn new(
        command: Command,
        mut loaded: LoadedConfig,
        seed: Option<u64>,
        out: Option<std::path::PathBuf>,
    ) -> Result<Self> {
        let seed = seed
            .or(loaded.config.seed)
            .ok_or_else(|| Error::Config("a seed is required: set `seed` in the config or pass --seed".into()))?;
        if let Some(out) = out {
            loaded.config.paths.out = out;
        }
        let manifest = Manifest {
            tool: TOOL,
            version: VERSION,
            command: command.name().into(),
            config_sha256: loaded.sha256.clone(),
            seed,
            frame_lat0: loaded.config.frame.lat0,
            frame_lon0: loaded.config.frame.lon0,
        };
        Ok(Run { loaded, seed, manifest })
    }

    pub fn config(&self) -> &RunConfig {
        &self.loaded.config
    }

    fn out(&self) -> Result<OutputDir<'_>> {
        OutputDir::create(&self.config().paths.out, &self.manifest)
    }

    fn prepared(&self) -> Result<Prepared> {
        prepare(load_inputs(self.config())?, self.config(), self.seed)
    }

    pub fn execute(&self, command: Command) -> Result<Vec<std::path::PathBuf>> {
        match command {
            Command::Generate => self.cmd_generate(),
            Command::Validate => self.cmd_validate(),
            Command::Patterns => self.cmd_patterns(),
            Command::Coverage => self.cmd_coverage(),
            Command::Fuse => self.cmd_fuse(),
            Command::Report => self.cmd_report(),
        }
    }

    /// Simulates the configured synthetic world and writes station,
    /// counter and trace files plus the ground-truth sidecar.
    pub fn cmd_generate(&self) -> Result<Vec<std::path::PathBuf>> {
        let cfg = self.config();
        let (frame, calendar) = (cfg.frame()?, cfg.calendar()?);
        let out_data = synth::generate(&cfg.synth, &frame, &calendar, self.seed)?;
        synth::check_conservation(&out_data.loads)?;
        let mut out = self.out()?;
        out.data("stations.csv", |w, pre| write_stations(w, pre, &out_data.registry))?;
        out.data("apc.csv", |w, pre| write_apc(w, pre, &calendar, &out_data.apc))?;
        out.data("traces.csv", |w, pre| {
            write_traces(w, pre, &calendar, &out_data.trace())
        })?;
        out.json("sidecar.json", &out_data.sidecar)?;
        Ok(out.written().to_vec())
    }

    pub fn cmd_validate(&self) -> Result<Vec<std::path::PathBuf>> {
        let mut p = self.prepared()?;
        let rows = run_validation(&mut p)?;
        let mut out = self.out()?;
        self.write_validation(&mut out, &rows)?;
        self.write_run_manifest(&mut out, "validate", &p)?;
        Ok(out.written().to_vec())
    }

    pub fn cmd_patterns(&self) -> Result<Vec<std::path::PathBuf>> {
        let mut p = self.prepared()?;
        let r = run_patterns(&mut p, self.config())?;
        let mut out = self.out()?;
        self.write_patterns(&mut out, &p, &r)?;
        self.write_run_manifest(&mut out, "patterns", &p)?;
        Ok(out.written().to_vec())
    }

    pub fn cmd_coverage(&self) -> Result<Vec<std::path::PathBuf>> {
        let p = self.prepared()?;
        let r = run_coverage(&p, self.config())?;
        let mut out = self.out()?;
        self.write_coverage(&mut out, &r)?;
        self.write_run_manifest(&mut out, "coverage", &p)?;
        Ok(out.written().to_vec())
    }

    pub fn cmd_fuse(&self) -> Result<Vec<std::path::PathBuf>> {
        let mut p = self.prepared()?;
        let cov = run_coverage(&p, self.config())?;
        let r = run_fusion(&mut p, &cov.profiles, self.config(), self.seed)?;
        let mut out = self.out()?;
        self.write_fusion(&mut out, &r)?;
        self.write_run_manifest(&mut out, "fuse", &p)?;
        Ok(out.written().to_vec())
    }

    /// Runs every analysis stage, writes their tables, then concatenates
    /// the manifest, config, counts, warnings and all tables into
    /// `report.txt`.
    pub fn cmd_report(&self) -> Result<Vec<std::path::PathBuf>> {
        let cfg = self.config();
        let mut p = self.prepared()?;
        let validation = run_validation(&mut p)?;
        let patterns = run_patterns(&mut p, cfg)?;
        let coverage = run_coverage(&p, cfg)?;
        let fusion = run_fusion(&mut p, &coverage.profiles, cfg, self.seed)?;
        let mut out = self.out()?;
        self.write_validation(&mut out, &validation)?;
        self.write_patterns(&mut out, &p, &patterns)?;
        self.write_coverage(&mut out, &coverage)?;
        self.write_fusion(&mut out, &fusion)?;
        self.write_run_manifest(&mut out, "report", &p)?;
        let tables: Vec<std::path::PathBuf> = out.written().to_vec();

        let mut text = String::new();
        for line in self.manifest.lines() {
            text.push_str(&format!("# {line}\n"));
        }
        text.push_str("\n## config\n");
        text.push_str(&self.loaded.text);
        if !self.loaded.text.ends_with('\n') {
            text.push('\n');
        }
        text.push_str("\n## counts\n");
        text.push_str(&serde_json::to_string_pretty(&p.counts)?);
        text.push_str("\n\n## warnings\n");
        for (k, n) in p.warnings.iter() {
            text.push_str(&format!("{k}: {n}\n"));
        }
        for path in &tables {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            text.push_str(&format!("\n## {name}\n"));
            if name.ends_with(".json") {
                text.push_str(&body);
            } else {
                text.push_str(&strip_manifest(&body));
            }
        }
        let path = out.dir.join("report.txt");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        let mut all = tables;
        all.push(path);
        Ok(all)
    }

    fn write_run_manifest(&self, out: &mut OutputDir<'_>, name: &str, p: &Prepared) -> Result<()> {
        #[derive(Serialize)]
        struct RunManifest<'a> {
            counts: &'a RunCounts,
            warnings: BTreeMap<&'a str, u64>,
        }
        for (k, n) in p.warnings.iter() {
            log::warn!("{k}: {n}");
        }
        out.json(
            &format!("run_{name}.json"),
            &RunManifest {
                counts: &p.counts,
                warnings: p.warnings.iter().collect(),
            },
        )?;
        Ok(())
    }

    fn write_validation(&self, out: &mut OutputDir<'_>, rows: &[ValidationReport]) -> Result<()> {
        out.table("validation.csv", |w| write_validation(w, rows))?;
        Ok(())
    }

    fn write_patterns(&self, out: &mut OutputDir<'_>, p: &Prepared, r: &PatternsResult) -> Result<()> {
        out.table("od.csv", |w| write_od(w, &r.od))?;
        out.table("od_scaled.csv", |w| write_scaled_od(w, &r.scaled))?;
        out.table("train_legs.csv", |w| write_contexts(w, &p.calendar, &p.contexts))?;
        out.json("travel_time.json", &r.travel_time.to_json())?;
        out.json("travel_distance.json", &r.travel_distance.to_json())?;
        out.json("flow_distribution.json", &r.flows.to_json())?;
        Ok(())
    }

    fn write_coverage(&self, out: &mut OutputDir<'_>, r: &CoverageResult) -> Result<()> {
        out.table("profiles.csv", |w| write_profiles(w, &r.profiles))?;
        out.table("cell_flows.csv", |w| write_cell_flows(w, &r.cell_flows))?;
        Ok(())
    }

    fn write_fusion(&self, out: &mut OutputDir<'_>, r: &FusionResult) -> Result<()> {
        let names = &r.features.feature_names;
        #[derive(Serialize)]
        struct TargetSummary {
            target: &'static str,
            r_squared: f64,
            oob_r_squared: Option<f64>,
        }
        #[derive(Serialize)]
        struct Summary<'a> {
            stations: &'a [String],
            excluded: &'a [crate::fusion::Exclusion],
            hyperparameters: &'a crate::fusion::Hyperparameters,
            targets: Vec<TargetSummary>,
        }
        out.json(
            "fusion.json",
            &Summary {
                stations: &r.features.station_ids,
                excluded: &r.features.excluded,
                hyperparameters: &self.config().forest,
                targets: r
                    .fits
                    .iter()
                    .map(|f| TargetSummary {
                        target: f.target.label(),
                        r_squared: f.r_squared,
                        oob_r_squared: f.oob_r_squared,
                    })
                    .collect(),
            },
        )?;
        for fit in &r.fits {
            let label = fit.target.label();
            let model = fit.forest.to_json(names)?;
            let model: serde_json::Value = serde_json::from_str(&model)?;
            out.json(&format!("model_{label}.json"), &model)?;
            out.table(&format!("importance_{label}.csv"), |w| {
                write_importance(
                    w,
                    names,
                    &fit.permutation_importance,
                    &fit.split_frequency,
                    fit.oob_permutation_importance.as_deref(),
                )
            })?;
            out.table(&format!("pdp_{label}.csv"), |w| {
                writeln!(w, "{PDP_HEADER}")?;
                for (name, curve) in names.iter().zip(&fit.pdp) {
                    write_pdp(w, name, curve)?;
                }
                Ok(())
            })?;
        }
        Ok(())
    }
}

pub const CELL_FLOW_HEADER: &str = "station_id,side,ix,iy,count";

pub fn write_cell_flows(w: &mut dyn Write, flows: &BTreeMap<String, StationCellFlows>) -> std::io::Result<()> {
    writeln!(w, "{CELL_FLOW_HEADER}")?;
    for (id, f) in flows {
        for (side, list) in [("origin", &f.origin), ("destination", &f.destination)] {
            for (cell, n) in &list.entries {
                writeln!(w, "{id},{side},{},{},{n}", cell.ix, cell.iy)?;
            }
        }
    }
    Ok(())
}

/// Exit status for a finished command: 0, 1 for input problems, 2 for a
/// violated internal invariant.
pub fn exit_code(result: &Result<Vec<std::path::PathBuf>>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_input_error() => 1,
        Err(_) => 2,
    }
}
