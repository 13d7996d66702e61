//! Synthetic ground truth: a toy radial rail network, simulated journeys,
//! exact counter data and an opt-in trace sample, plus a sidecar holding the
//! true tallies every analysis stage should reproduce.
//!
//! Randomness is split into independent ChaCha streams of the run seed:
//! stream 0 builds the network and stream `1 + d` simulates day `d`, so days
//! run in parallel with results identical to a serial run.

use std::collections::BTreeMap;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::RawLegRecord;
use crate::model::{
    ApcEvent, Calendar, GridCell, LatLon, ProjectionFrame, Station, StationRegistry, Timestamp, TravelMode, CELL_SIZE_M,
};
use crate::{Error, Result};

const HOUR: f64 = 3600.0;
const DETOUR: f64 = 1.3;
const PLATFORM_SECS: i64 = 60;
const TRANSFER_SECS: i64 = 120;
const FEEDER_WAIT_SECS: i64 = 300;
const LINE_IDS: [&str; 4] = ["A", "B", "C", "D"];
pub const HUB_ID: &str = "CEN";

/// Relative mode weights for access or egress legs. Walking decays with
/// distance to the station, the motorised modes take over further out;
/// cycling and unknown do not depend on distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModeWeights {
    pub walking: f64,
    pub cycling: f64,
    pub private_car: f64,
    pub bus: f64,
    pub tram: f64,
    pub subway: f64,
    pub unknown: f64,
}

impl Default for ModeWeights {
    fn default() -> Self {
        ModeWeights {
            walking: 1.0,
            cycling: 0.15,
            private_car: 0.25,
            bus: 0.6,
            tram: 0.2,
            subway: 0.1,
            unknown: 0.02,
        }
    }
}

impl ModeWeights {
    fn validate(&self, side: &str) -> Result<()> {
        let all = [
            self.walking,
            self.cycling,
            self.private_car,
            self.bus,
            self.tram,
            self.subway,
            self.unknown,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!(
                "{side} mode weights must be finite and non-negative"
            )));
        }
        if all.iter().sum::<f64>() == 0.0 {
            return Err(Error::Config(format!("{side} mode weights are all zero")));
        }
        Ok(())
    }

    fn at(&self, distance_km: f64, near_km: f64, cycling: f64) -> [f64; TravelMode::COUNT] {
        let near = (-distance_km / near_km).exp();
        let far = 1.0 - near;
        let mut w = [0.0; TravelMode::COUNT];
        w[TravelMode::Walking.index()] = self.walking * near;
        w[TravelMode::Cycling.index()] = cycling;
        w[TravelMode::PrivateCar.index()] = self.private_car * far;
        w[TravelMode::Bus.index()] = self.bus * far;
        w[TravelMode::Tram.index()] = self.tram * far;
        w[TravelMode::Subway.index()] = self.subway * far;
        w[TravelMode::Unknown.index()] = self.unknown;
        if w.iter().sum::<f64>() <= 0.0 {
            w[TravelMode::Walking.index()] = 1.0;
        }
        w
    }
}

fn speed_kmh(mode: TravelMode) -> f64 {
    match mode {
        TravelMode::Walking => 5.0,
        TravelMode::Cycling => 15.0,
        TravelMode::PrivateCar => 30.0,
        TravelMode::Bus => 20.0,
        TravelMode::Tram => 18.0,
        TravelMode::Subway => 35.0,
        TravelMode::Train => 60.0,
        TravelMode::Unknown => 10.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub start_date: NaiveDate,
    pub n_days: u32,
    /// Journeys on each weekday; weekend days get `weekend_factor` of this.
    pub journeys_per_day: u32,
    pub weekend_factor: f64,
    /// Probability that a journey is recorded in the trace.
    pub opt_in_rate: f64,
    /// Fraction of vehicle trips whose counts are imputed.
    pub apc_imputation_rate: f64,
    /// Sigma of the mean-one lognormal factor applied to imputed counts.
    pub imputation_noise_sigma: f64,
    pub n_lines: usize,
    pub stations_per_line: usize,
    pub station_spacing_km: f64,
    pub headway_minutes: u32,
    pub hop_runtime_minutes: f64,
    pub service_start_hour: u32,
    pub service_end_hour: u32,
    pub hub_lat: f64,
    pub hub_lon: f64,
    /// Station size range; sizes are log-uniform in it. The size is the
    /// number of distinct home cells in the station's catchment.
    pub size_min: f64,
    pub size_max: f64,
    /// Lognormal sigma linking destination breadth to station size.
    pub destination_size_sigma: f64,
    pub catchment_radius_km: f64,
    /// Catchment radius grows as `(sites / typical size)^exponent`, per side.
    pub catchment_size_exponent: f64,
    pub catchment_radius_sigma: f64,
    /// Lognormal sigma of per-site popularity.
    pub site_weight_sigma: f64,
    /// Gravity exponent on station-to-station distance.
    pub distance_decay: f64,
    pub allow_transfers: bool,
    /// Whether journeys may start or end at the hub.
    pub hub_demand: bool,
    /// Distance scale of the walking share, km.
    pub near_km: f64,
    pub access: ModeWeights,
    pub egress: ModeWeights,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            start_date: NaiveDate::from_ymd_opt(2021, 9, 1).expect("valid date"),
            n_days: 30,
            journeys_per_day: 2000,
            weekend_factor: 0.3,
            opt_in_rate: 0.025,
            apc_imputation_rate: 0.1,
            imputation_noise_sigma: 0.1,
            n_lines: 3,
            stations_per_line: 10,
            station_spacing_km: 2.5,
            headway_minutes: 10,
            hop_runtime_minutes: 2.5,
            service_start_hour: 5,
            service_end_hour: 23,
            hub_lat: 60.1719,
            hub_lon: 24.9414,
            size_min: 10.0,
            size_max: 120.0,
            destination_size_sigma: 1.0,
            catchment_radius_km: 1.5,
            catchment_size_exponent: 0.25,
            catchment_radius_sigma: 0.25,
            site_weight_sigma: 0.5,
            distance_decay: 1.0,
            allow_transfers: true,
            hub_demand: true,
            near_km: 0.8,
            access: ModeWeights::default(),
            egress: ModeWeights {
                cycling: 0.08,
                private_car: 0.05,
                ..ModeWeights::default()
            },
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if !(self.opt_in_rate >= 0.0 && self.opt_in_rate <= 1.0) {
            return bad("opt_in_rate must be in [0, 1]");
        }
        if !(self.apc_imputation_rate >= 0.0 && self.apc_imputation_rate < 1.0) {
            return bad("apc_imputation_rate must be in [0, 1)");
        }
        if !(self.imputation_noise_sigma >= 0.0 && self.imputation_noise_sigma.is_finite()) {
            return bad("imputation_noise_sigma must be non-negative");
        }
        if !(self.weekend_factor >= 0.0 && self.weekend_factor.is_finite()) {
            return bad("weekend_factor must be non-negative");
        }
        if !(2..=LINE_IDS.len()).contains(&self.n_lines) {
            return bad("n_lines must be between 2 and 4");
        }
        if !(3..=99).contains(&self.stations_per_line) {
            return bad("stations_per_line must be between 3 and 99");
        }
        if self.n_days == 0 {
            return bad("n_days must be positive");
        }
        if self.headway_minutes == 0 {
            return bad("headway_minutes must be positive");
        }
        if !(self.hop_runtime_minutes > 0.0 && self.hop_runtime_minutes.is_finite()) {
            return bad("hop_runtime_minutes must be positive");
        }
        if self.service_start_hour >= self.service_end_hour || self.service_end_hour > 24 {
            return bad("service hours must satisfy start < end <= 24");
        }
        if self.service_start_hour > 5 || self.service_end_hour < 22 {
            return bad("service must cover 05:00 to 22:00");
        }
        let positive = [
            self.station_spacing_km,
            self.size_min,
            self.catchment_radius_km,
            self.near_km,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("spacing, sizes, radii and near_km must be positive");
        }
        if self.size_max < self.size_min {
            return bad("size_max must be at least size_min");
        }
        let sigmas = [
            self.destination_size_sigma,
            self.catchment_radius_sigma,
            self.site_weight_sigma,
            self.distance_decay,
            self.catchment_size_exponent,
        ];
        if sigmas.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("sigmas, exponents and distance_decay must be non-negative");
        }
        LatLon::new(self.hub_lat, self.hub_lon)?;
        self.access.validate("access")?;
        self.egress.validate("egress")?;
        Ok(())
    }

    fn journeys_on(&self, date: NaiveDate) -> u32 {
        if is_weekday(date) {
            self.journeys_per_day
        } else {
            (self.journeys_per_day as f64 * self.weekend_factor).round() as u32
        }
    }
}

fn is_weekday(date: NaiveDate) -> bool {
    !matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// A world where ridership is a known monotone function of catchment
/// breadth. Boardings follow the number of home cells, alightings the
/// number of work cells; each station's cycling access weight is drawn
/// independently of both and is the planted irrelevant feature. Every
/// journey is observed so the profiles are complete.
pub fn plant_relationship(base: &SynthConfig) -> SynthConfig {
    SynthConfig {
        opt_in_rate: 1.0,
        apc_imputation_rate: 0.0,
        n_lines: 4,
        stations_per_line: 12,
        journeys_per_day: 1500,
        size_min: 10.0,
        size_max: 150.0,
        destination_size_sigma: 0.35,
        catchment_size_exponent: 0.5,
        catchment_radius_sigma: 0.1,
        distance_decay: 0.0,
        allow_transfers: false,
        hub_demand: false,
        access: ModeWeights {
            walking: 1.0,
            cycling: 0.3,
            private_car: 0.3,
            bus: 0.8,
            tram: 0.3,
            subway: 0.2,
            unknown: 0.0,
        },
        egress: ModeWeights {
            walking: 1.0,
            cycling: 0.0,
            private_car: 0.2,
            bus: 0.8,
            tram: 0.3,
            subway: 0.2,
            unknown: 0.0,
        },
        ..base.clone()
    }
}

/// Profile columns the planted world makes informative or irrelevant.
pub const PLANTED_SIGNAL_BOARDINGS: &str = "n_origin";
pub const PLANTED_SIGNAL_ALIGHTINGS: &str = "n_destination";
pub const PLANTED_NOISE: &str = "access_cycling";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederStop {
    pub stop_id: String,
    pub position: LatLon,
}

/// A home or work location: one per grid cell of a station's catchment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub position: LatLon,
    pub cell: GridCell,
    pub weight: f64,
    pub feeder_stop: FeederStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub line_id: String,
    /// Outward order, hub first.
    pub stations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStation {
    pub station: Station,
    /// Planar position in the run frame, meters.
    pub xy: (f64, f64),
    /// `(line, position)` pairs; position 0 is the hub.
    pub lines: Vec<(usize, usize)>,
    pub size: f64,
    /// Home-side catchment radius.
    pub catchment_km: f64,
    pub work_catchment_km: f64,
    pub cycling_weight: f64,
    pub home_sites: Vec<Site>,
    pub work_sites: Vec<Site>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyNetwork {
    pub lines: Vec<Line>,
    /// Hub first, then line by line outward.
    pub stations: Vec<NetworkStation>,
    pub headway_secs: i64,
    pub hop_secs: i64,
    pub first_departure_secs: i64,
    pub last_departure_secs: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Direction {
    Inbound,
    Outbound,
}

impl ToyNetwork {
    pub fn build(cfg: &SynthConfig, frame: &ProjectionFrame, rng: &mut ChaCha8Rng) -> Result<Self> {
        let hub_xy = frame.to_planar(LatLon::new(cfg.hub_lat, cfg.hub_lon)?);
        let typical = (cfg.size_min * cfg.size_max).sqrt();
        let mut stations = Vec::new();
        let mut lines = Vec::new();
        let mut place = |id: String, name: String, xy: (f64, f64), rng: &mut ChaCha8Rng| -> Result<usize> {
            let position = frame.from_planar(xy.0, xy.1);
            position.validate()?;
            let size = (cfg.size_min.ln() + rng.random::<f64>() * (cfg.size_max / cfg.size_min).ln()).exp();
            let spread = (cfg.catchment_radius_sigma * rng.sample::<f64, _>(StandardNormal)).exp();
            let cycling_weight = cfg.access.cycling * 2.0 * rng.random::<f64>();
            let n_home = (size.round() as usize).max(1);
            let z: f64 = rng.sample(StandardNormal);
            let n_work = ((size * (cfg.destination_size_sigma * z).exp()).round() as usize).max(1);
            // more sites need more room
            let radius =
                |n: usize| cfg.catchment_radius_km * (n as f64 / typical).powf(cfg.catchment_size_exponent) * spread;
            let (catchment_km, work_catchment_km) = (radius(n_home), radius(n_work));
            let home_sites = place_sites(&id, 'h', xy, catchment_km, n_home, cfg.site_weight_sigma, frame, rng);
            let work_sites = place_sites(
                &id,
                'w',
                xy,
                work_catchment_km,
                n_work,
                cfg.site_weight_sigma,
                frame,
                rng,
            );
            stations.push(NetworkStation {
                station: Station {
                    station_id: id,
                    name,
                    lat: position.lat,
                    lon: position.lon,
                },
                xy,
                lines: Vec::new(),
                size,
                catchment_km,
                work_catchment_km,
                cycling_weight,
                home_sites,
                work_sites,
            });
            Ok(stations.len() - 1)
        };
        let hub = place(HUB_ID.into(), "Central".into(), hub_xy, rng)?;
        let turn = std::f64::consts::TAU / cfg.n_lines as f64;
        for (l, line_id) in LINE_IDS.iter().take(cfg.n_lines).enumerate() {
            let heading = turn * l as f64 + rng.random_range(-0.15..0.15);
            let mut members = vec![hub];
            let mut r = 0.0;
            for p in 1..=cfg.stations_per_line {
                r += cfg.station_spacing_km * 1000.0 * rng.random_range(0.85..1.15);
                let a = heading + rng.random_range(-0.05..0.05);
                let xy = (hub_xy.0 + r * a.cos(), hub_xy.1 + r * a.sin());
                let id = format!("{line_id}{p:02}");
                members.push(place(id.clone(), format!("Line {line_id} stop {p}"), xy, rng)?);
            }
            lines.push(Line {
                line_id: line_id.to_string(),
                stations: members,
            });
        }
        for (l, line) in lines.iter().enumerate() {
            for (p, &s) in line.stations.iter().enumerate() {
                stations[s].lines.push((l, p));
            }
        }
        let headway_secs = i64::from(cfg.headway_minutes) * 60;
        let first = i64::from(cfg.service_start_hour) * 3600;
        let end = i64::from(cfg.service_end_hour) * 3600;
        Ok(ToyNetwork {
            lines,
            stations,
            headway_secs,
            hop_secs: (cfg.hop_runtime_minutes * 60.0).round().max(1.0) as i64,
            first_departure_secs: first,
            last_departure_secs: first + (end - first) / headway_secs * headway_secs,
        })
    }

    pub fn registry(&self) -> Result<StationRegistry> {
        StationRegistry::new(self.stations.iter().map(|s| s.station.clone()))
    }

    pub fn hub(&self) -> usize {
        0
    }

    fn n_trips(&self) -> i64 {
        (self.last_departure_secs - self.first_departure_secs) / self.headway_secs + 1
    }

    /// Stop sequence of a trip on `line` in `dir`.
    fn stops(&self, line: usize, dir: Direction) -> Vec<usize> {
        let mut s = self.lines[line].stations.clone();
        if dir == Direction::Inbound {
            s.reverse();
        }
        s
    }

    fn stop_index(&self, line: usize, dir: Direction, station: usize) -> usize {
        let pos = self.stations[station]
            .lines
            .iter()
            .find(|(l, _)| *l == line)
            .map(|(_, p)| *p)
            .expect("station lies on the line");
        match dir {
            Direction::Outbound => pos,
            Direction::Inbound => self.lines[line].stations.len() - 1 - pos,
        }
    }

    /// First trip leaving stop `idx` at or after `ready` (seconds of day).
    fn next_departure(&self, idx: usize, ready: i64) -> Option<(i64, i64)> {
        let offset = self.first_departure_secs + idx as i64 * self.hop_secs;
        let n = (ready - offset).max(0);
        let n = (n + self.headway_secs - 1) / self.headway_secs;
        (n < self.n_trips()).then(|| (n, offset + n * self.headway_secs))
    }

    fn shares_line(&self, a: usize, b: usize) -> Option<usize> {
        self.stations[a]
            .lines
            .iter()
            .find(|(l, _)| self.stations[b].lines.iter().any(|(m, _)| m == l))
            .map(|(l, _)| *l)
    }

    /// Rides from `a` to `b`: direct when they share a line, else via the
    /// hub.
    fn route(&self, a: usize, b: usize) -> Vec<(usize, Direction, usize, usize)> {
        let hub = self.hub();
        let direct = |from: usize, to: usize| {
            let line = self.shares_line(from, to).expect("stations share a line");
            let pos = |s: usize| {
                self.stations[s]
                    .lines
                    .iter()
                    .find(|(l, _)| *l == line)
                    .expect("on line")
                    .1
            };
            let dir = if pos(to) > pos(from) {
                Direction::Outbound
            } else {
                Direction::Inbound
            };
            (line, dir, from, to)
        };
        if self.shares_line(a, b).is_some() {
            vec![direct(a, b)]
        } else {
            vec![direct(a, hub), direct(hub, b)]
        }
    }

    fn distance_km(&self, a: usize, b: usize) -> f64 {
        planar_km(self.stations[a].xy, self.stations[b].xy)
    }
}

fn planar_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1) / 1000.0
}

/// Picks `n` distinct grid cells whose centroids lie within `radius_km`
/// of `xy`, widening the disk until there are enough.
#[allow(clippy::too_many_arguments)]
fn place_sites(
    station_id: &str,
    tag: char,
    xy: (f64, f64),
    radius_km: f64,
    n: usize,
    weight_sigma: f64,
    frame: &ProjectionFrame,
    rng: &mut ChaCha8Rng,
) -> Vec<Site> {
    let mut r = radius_km * 1000.0;
    let candidates = loop {
        let lo_x = ((xy.0 - r) / CELL_SIZE_M).floor() as i64;
        let hi_x = ((xy.0 + r) / CELL_SIZE_M).floor() as i64;
        let lo_y = ((xy.1 - r) / CELL_SIZE_M).floor() as i64;
        let hi_y = ((xy.1 + r) / CELL_SIZE_M).floor() as i64;
        let mut cells = Vec::new();
        for ix in lo_x..=hi_x {
            for iy in lo_y..=hi_y {
                let c = ((ix as f64 + 0.5) * CELL_SIZE_M, (iy as f64 + 0.5) * CELL_SIZE_M);
                if (c.0 - xy.0).hypot(c.1 - xy.1) <= r {
                    cells.push(GridCell::new(ix, iy));
                }
            }
        }
        if cells.len() >= n {
            break cells;
        }
        r *= 1.1;
    };
    let mut picked = rand::seq::index::sample(rng, candidates.len(), n).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .enumerate()
        .map(|(k, i)| {
            let cell = candidates[i];
            // stay 25 m inside the cell so snapping returns it
            let x = (cell.ix as f64 + 0.5) * CELL_SIZE_M + rng.random_range(-100.0..100.0);
            let y = (cell.iy as f64 + 0.5) * CELL_SIZE_M + rng.random_range(-100.0..100.0);
            let z: f64 = rng.sample(StandardNormal);
            let d = rng.random_range(150.0..400.0);
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            Site {
                position: frame.from_planar(x, y),
                cell,
                weight: (weight_sigma * z).exp(),
                feeder_stop: FeederStop {
                    stop_id: format!("{station_id}-{tag}{k:03}"),
                    position: frame.from_planar(x + d * a.cos(), y + d * a.sin()),
                },
            }
        })
        .collect()
}

/// One simulated door-to-door journey with exact coordinates and times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueJourney {
    pub journey_id: String,
    pub device_tag: String,
    pub date: NaiveDate,
    pub opted_in: bool,
    pub legs: Vec<RawLegRecord>,
}

impl TrueJourney {
    pub fn train_legs(&self) -> impl Iterator<Item = (usize, &RawLegRecord)> {
        self.legs
            .iter()
            .enumerate()
            .filter(|(_, l)| l.mode == TravelMode::Train)
    }
}

/// True per-stop counts of one vehicle trip, in stop order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripLoad {
    pub trip_id: String,
    pub route_id: String,
    pub stops: Vec<StopLoad>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopLoad {
    pub station_id: String,
    pub time: Timestamp,
    pub boardings: u32,
    pub alightings: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SidecarCounts {
    pub journeys: u64,
    pub weekday_journeys: u64,
    pub traced_journeys: u64,
    pub traced_weekday_journeys: u64,
    pub weekday_train_legs: u64,
    pub traced_weekday_train_legs: u64,
    pub dropped_journeys: u64,
    pub trace_rows: u64,
    pub apc_trips: u64,
    pub apc_rows: u64,
    pub imputed_trips: u64,
    pub weekdays: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlantedFeatures {
    /// Target name to the profile column that drives it.
    pub signal: BTreeMap<String, String>,
    /// Profile columns drawn independently of demand.
    pub noise: Vec<String>,
    pub station_size: BTreeMap<String, f64>,
    pub origin_breadth: BTreeMap<String, usize>,
    pub destination_breadth: BTreeMap<String, usize>,
    pub catchment_km: BTreeMap<String, f64>,
    pub cycling_weight: BTreeMap<String, f64>,
}

/// Station-keyed cell flow: `[ix, iy, count]`, sorted by cell.
pub type CellCounts = Vec<[i64; 3]>;

/// Ground truth over all weekday journeys, observed or not.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub counts: SidecarCounts,
    /// Hourly (0..24, local board time) boardings per station.
    pub true_boardings: BTreeMap<String, Vec<u64>>,
    /// Hourly (local alight time) alightings per station.
    pub true_alightings: BTreeMap<String, Vec<u64>>,
    pub true_od: BTreeMap<String, BTreeMap<String, u64>>,
    /// Station to mode label to count, for the leg before each train leg.
    pub true_access_modes: BTreeMap<String, BTreeMap<String, u64>>,
    pub true_egress_modes: BTreeMap<String, BTreeMap<String, u64>>,
    /// Journey start cells keyed by boarding station of each train leg.
    pub true_origin_cells: BTreeMap<String, CellCounts>,
    /// Journey end cells keyed by alighting station of each train leg.
    pub true_destination_cells: BTreeMap<String, CellCounts>,
    pub opt_in_ids: Vec<String>,
    pub planted_features: PlantedFeatures,
}

impl Sidecar {
    pub fn total_boardings(&self) -> BTreeMap<String, u64> {
        self.true_boardings
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().sum()))
            .collect()
    }

    pub fn total_alightings(&self) -> BTreeMap<String, u64> {
        self.true_alightings
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().sum()))
            .collect()
    }
}

#[derive(Default)]
struct Tallies {
    boardings: BTreeMap<String, Vec<u64>>,
    alightings: BTreeMap<String, Vec<u64>>,
    od: BTreeMap<String, BTreeMap<String, u64>>,
    access: BTreeMap<String, BTreeMap<String, u64>>,
    egress: BTreeMap<String, BTreeMap<String, u64>>,
    origin_cells: BTreeMap<String, BTreeMap<GridCell, u64>>,
    destination_cells: BTreeMap<String, BTreeMap<GridCell, u64>>,
}

impl Tallies {
    /// Applies the per-train-leg rule directly to a true journey.
    fn record(&mut self, j: &TrueJourney, frame: &ProjectionFrame, midnight: i64) -> Result<()> {
        let origin = frame.snap_to_cell(j.legs[0].start)?;
        let destination = frame.snap_to_cell(j.legs[j.legs.len() - 1].end)?;
        let hour = |t: Timestamp| ((t.0 - midnight).div_euclid(3600)) as usize;
        for (i, leg) in j.train_legs() {
            let board = leg.board_station.clone().expect("train legs carry stations");
            let alight = leg.alight_station.clone().expect("train legs carry stations");
            self.boardings.entry(board.clone()).or_insert_with(|| vec![0; 24])[hour(leg.start_time)] += 1;
            self.alightings.entry(alight.clone()).or_insert_with(|| vec![0; 24])[hour(leg.end_time)] += 1;
            *self
                .od
                .entry(board.clone())
                .or_default()
                .entry(alight.clone())
                .or_default() += 1;
            let access = if i == 0 {
                TravelMode::Unknown
            } else {
                j.legs[i - 1].mode
            };
            let egress = j.legs.get(i + 1).map_or(TravelMode::Unknown, |l| l.mode);
            *self
                .access
                .entry(board.clone())
                .or_default()
                .entry(access.label().into())
                .or_default() += 1;
            *self
                .egress
                .entry(alight.clone())
                .or_default()
                .entry(egress.label().into())
                .or_default() += 1;
            *self.origin_cells.entry(board).or_default().entry(origin).or_default() += 1;
            *self
                .destination_cells
                .entry(alight)
                .or_default()
                .entry(destination)
                .or_default() += 1;
        }
        Ok(())
    }

    fn merge(&mut self, other: Tallies) {
        fn vecs(a: &mut BTreeMap<String, Vec<u64>>, b: BTreeMap<String, Vec<u64>>) {
            for (k, v) in b {
                let e = a.entry(k).or_insert_with(|| vec![0; 24]);
                for (x, y) in e.iter_mut().zip(v) {
                    *x += y;
                }
            }
        }
        fn nested<K: Ord>(a: &mut BTreeMap<String, BTreeMap<K, u64>>, b: BTreeMap<String, BTreeMap<K, u64>>) {
            for (k, inner) in b {
                let e = a.entry(k).or_default();
                for (k2, v) in inner {
                    *e.entry(k2).or_default() += v;
                }
            }
        }
        vecs(&mut self.boardings, other.boardings);
        vecs(&mut self.alightings, other.alightings);
        nested(&mut self.od, other.od);
        nested(&mut self.access, other.access);
        nested(&mut self.egress, other.egress);
        nested(&mut self.origin_cells, other.origin_cells);
        nested(&mut self.destination_cells, other.destination_cells);
    }
}

fn cell_counts(m: BTreeMap<String, BTreeMap<GridCell, u64>>) -> BTreeMap<String, CellCounts> {
    m.into_iter()
        .map(|(k, cells)| (k, cells.into_iter().map(|(c, n)| [c.ix, c.iy, n as i64]).collect()))
        .collect()
}

/// Everything a generation run produces.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub network: ToyNetwork,
    pub registry: StationRegistry,
    pub apc: Vec<ApcEvent>,
    /// Opted-in journeys only; their legs form the trace file.
    pub journeys: Vec<TrueJourney>,
    /// True loads of every trip that carried anyone, before imputation
    /// noise.
    pub loads: Vec<TripLoad>,
    pub sidecar: Sidecar,
}

impl SynthOutput {
    pub fn trace(&self) -> Vec<RawLegRecord> {
        self.journeys.iter().flat_map(|j| j.legs.iter().cloned()).collect()
    }
}

struct DayResult {
    weekday: bool,
    journeys: u64,
    dropped: u64,
    traced: Vec<TrueJourney>,
    tallies: Tallies,
    train_legs: u64,
    traced_train_legs: u64,
    apc: Vec<ApcEvent>,
    loads: Vec<TripLoad>,
    imputed_trips: u64,
}

/// Sampling tables shared by all days.
struct Demand {
    origin: WeightedIndex<f64>,
    destination: Vec<Option<WeightedIndex<f64>>>,
    home_site: Vec<WeightedIndex<f64>>,
    work_site: Vec<WeightedIndex<f64>>,
}

impl Demand {
    fn new(net: &ToyNetwork, cfg: &SynthConfig) -> Result<Self> {
        let n = net.stations.len();
        let hub = net.hub();
        let allowed_end = |s: usize| cfg.hub_demand || s != hub;
        let destination: Vec<Option<WeightedIndex<f64>>> = (0..n)
            .map(|i| {
                let w: Vec<f64> = (0..n)
                    .map(|j| {
                        let reachable = cfg.allow_transfers || net.shares_line(i, j).is_some();
                        if j == i || !allowed_end(j) || !reachable {
                            0.0
                        } else {
                            let d = net.distance_km(i, j).max(0.5);
                            net.stations[j].work_sites.len() as f64 / d.powf(cfg.distance_decay)
                        }
                    })
                    .collect();
                WeightedIndex::new(w).ok()
            })
            .collect();
        let origin_w: Vec<f64> = (0..n)
            .map(|i| {
                if allowed_end(i) && destination[i].is_some() {
                    net.stations[i].home_sites.len() as f64
                } else {
                    0.0
                }
            })
            .collect();
        let origin = WeightedIndex::new(origin_w)
            .map_err(|_| Error::Config("synth: no station can originate journeys".into()))?;
        let sites = |f: fn(&NetworkStation) -> &Vec<Site>| -> Vec<WeightedIndex<f64>> {
            net.stations
                .iter()
                .map(|s| WeightedIndex::new(f(s).iter().map(|x| x.weight)).expect("stations have sites"))
                .collect()
        };
        Ok(Demand {
            origin,
            destination,
            home_site: sites(|s| &s.home_sites),
            work_site: sites(|s| &s.work_sites),
        })
    }
}

struct Ride {
    line: usize,
    dir: Direction,
    trip: i64,
    from_idx: usize,
    to_idx: usize,
}

struct DayContext<'a> {
    net: &'a ToyNetwork,
    cfg: &'a SynthConfig,
    demand: &'a Demand,
    date: NaiveDate,
    midnight: i64,
}

impl DayContext<'_> {
    fn leg(&self, tag: &str, mode: TravelMode, t0: i64, t1: i64, a: LatLon, b: LatLon) -> RawLegRecord {
        RawLegRecord {
            device_tag: tag.to_string(),
            date: self.date,
            mode,
            start_time: Timestamp(self.midnight + t0),
            end_time: Timestamp(self.midnight + t1),
            start: a,
            end: b,
            board_station: None,
            alight_station: None,
            route_id: None,
        }
    }

    fn travel_secs(mode: TravelMode, a: LatLon, b: LatLon, frame: &ProjectionFrame) -> i64 {
        let km = planar_km(frame.to_planar(a), frame.to_planar(b)) * DETOUR;
        ((km / speed_kmh(mode) * HOUR).round() as i64).max(60)
    }

    fn departure_secs(rng: &mut ChaCha8Rng) -> i64 {
        let u: f64 = rng.random();
        let z: f64 = rng.sample(StandardNormal);
        let h = if u < 0.4 {
            7.75 + 0.8 * z
        } else if u < 0.75 {
            16.5 + 1.0 * z
        } else {
            rng.random_range(6.0..20.0)
        };
        (h.clamp(5.5, 20.5) * HOUR).round() as i64
    }

    /// One journey, or `None` when it would miss the last train.
    fn journey(&self, k: u32, frame: &ProjectionFrame, rng: &mut ChaCha8Rng) -> Option<(TrueJourney, Vec<Ride>)> {
        let net = self.net;
        let tag = format!("dev{k:06}");
        let i = self.demand.origin.sample(rng);
        let j = self.demand.destination[i]
            .as_ref()
            .expect("origin has destinations")
            .sample(rng);
        let home = &net.stations[i].home_sites[self.demand.home_site[i].sample(rng)];
        let work = &net.stations[j].work_sites[self.demand.work_site[j].sample(rng)];
        let (si, sj) = (&net.stations[i], &net.stations[j]);
        let mut legs = Vec::new();
        let mut t = Self::departure_secs(rng);

        // access
        let d = planar_km(frame.to_planar(home.position), si.xy);
        let w = self.cfg.access.at(d, self.cfg.near_km, si.cycling_weight);
        let mode = TravelMode::ALL[WeightedIndex::new(w).expect("positive weights").sample(rng)];
        let station_pos = si.station.position();
        if matches!(mode, TravelMode::Bus | TravelMode::Tram | TravelMode::Subway) {
            let stop = &home.feeder_stop;
            let t1 = t + Self::travel_secs(TravelMode::Walking, home.position, stop.position, frame);
            legs.push(self.leg(&tag, TravelMode::Walking, t, t1, home.position, stop.position));
            let t2 = t1 + rng.random_range(0..=FEEDER_WAIT_SECS);
            let t3 = t2 + Self::travel_secs(mode, stop.position, station_pos, frame);
            let mut feeder = self.leg(&tag, mode, t2, t3, stop.position, station_pos);
            feeder.board_station = Some(stop.stop_id.clone());
            feeder.alight_station = Some(si.station.station_id.clone());
            feeder.route_id = Some(format!("{}-{}", mode.label(), si.station.station_id));
            legs.push(feeder);
            t = t3;
        } else {
            let t1 = t + Self::travel_secs(mode, home.position, station_pos, frame);
            legs.push(self.leg(&tag, mode, t, t1, home.position, station_pos));
            t = t1;
        }

        // train
        let mut rides = Vec::new();
        let mut ready = t + PLATFORM_SECS;
        for (line, dir, from, to) in net.route(i, j) {
            let from_idx = net.stop_index(line, dir, from);
            let to_idx = net.stop_index(line, dir, to);
            let (trip, dep) = net.next_departure(from_idx, ready)?;
            let arr = dep + (to_idx - from_idx) as i64 * net.hop_secs;
            let a = net.stations[from].station.position();
            let b = net.stations[to].station.position();
            let mut leg = self.leg(&tag, TravelMode::Train, dep, arr, a, b);
            leg.board_station = Some(net.stations[from].station.station_id.clone());
            leg.alight_station = Some(net.stations[to].station.station_id.clone());
            leg.route_id = Some(net.lines[line].line_id.clone());
            legs.push(leg);
            rides.push(Ride {
                line,
                dir,
                trip,
                from_idx,
                to_idx,
            });
            t = arr;
            ready = arr + TRANSFER_SECS;
        }

        // egress
        let station_pos = sj.station.position();
        let d = planar_km(frame.to_planar(work.position), sj.xy);
        let w = self.cfg.egress.at(d, self.cfg.near_km, self.cfg.egress.cycling);
        let mode = TravelMode::ALL[WeightedIndex::new(w).expect("positive weights").sample(rng)];
        if matches!(mode, TravelMode::Bus | TravelMode::Tram | TravelMode::Subway) {
            let stop = &work.feeder_stop;
            let t1 = t + PLATFORM_SECS + rng.random_range(0..=FEEDER_WAIT_SECS);
            let t2 = t1 + Self::travel_secs(mode, station_pos, stop.position, frame);
            let mut feeder = self.leg(&tag, mode, t1, t2, station_pos, stop.position);
            feeder.board_station = Some(sj.station.station_id.clone());
            feeder.alight_station = Some(stop.stop_id.clone());
            feeder.route_id = Some(format!("{}-{}", mode.label(), sj.station.station_id));
            legs.push(feeder);
            let t3 = t2 + Self::travel_secs(TravelMode::Walking, stop.position, work.position, frame);
            legs.push(self.leg(&tag, TravelMode::Walking, t2, t3, stop.position, work.position));
        } else {
            let t1 = t + Self::travel_secs(mode, station_pos, work.position, frame);
            legs.push(self.leg(&tag, mode, t, t1, station_pos, work.position));
        }

        Some((
            TrueJourney {
                journey_id: format!("{}#{k:06}", self.date),
                device_tag: tag,
                date: self.date,
                opted_in: false,
                legs,
            },
            rides,
        ))
    }
}

fn simulate_day(
    net: &ToyNetwork,
    cfg: &SynthConfig,
    demand: &Demand,
    frame: &ProjectionFrame,
    calendar: &Calendar,
    seed: u64,
    day: u32,
) -> Result<DayResult> {
    let date = cfg.start_date + Days::new(u64::from(day));
    let midnight = calendar
        .from_local(date.and_hms_opt(0, 0, 0).expect("midnight exists"))
        .0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + u64::from(day));
    let ctx = DayContext {
        net,
        cfg,
        demand,
        date,
        midnight,
    };
    let weekday = is_weekday(date);
    let mut out = DayResult {
        weekday,
        journeys: 0,
        dropped: 0,
        traced: Vec::new(),
        tallies: Tallies::default(),
        train_legs: 0,
        traced_train_legs: 0,
        apc: Vec::new(),
        loads: Vec::new(),
        imputed_trips: 0,
    };
    let mut loads: BTreeMap<(usize, Direction, i64), Vec<(u32, u32)>> = BTreeMap::new();
    for k in 0..cfg.journeys_on(date) {
        let Some((mut journey, rides)) = ctx.journey(k, frame, &mut rng) else {
            out.dropped += 1;
            continue;
        };
        journey.opted_in = rng.random::<f64>() < cfg.opt_in_rate;
        out.journeys += 1;
        for r in &rides {
            let stops = loads
                .entry((r.line, r.dir, r.trip))
                .or_insert_with(|| vec![(0, 0); net.lines[r.line].stations.len()]);
            stops[r.from_idx].0 += 1;
            stops[r.to_idx].1 += 1;
        }
        if weekday {
            out.tallies.record(&journey, frame, midnight)?;
            out.train_legs += rides.len() as u64;
            if journey.opted_in {
                out.traced_train_legs += rides.len() as u64;
            }
        }
        if journey.opted_in {
            out.traced.push(journey);
        }
    }

    let ymd = date.format("%Y%m%d");
    for ((line, dir, trip), counts) in loads {
        let line_id = &net.lines[line].line_id;
        let d = if dir == Direction::Inbound { "I" } else { "O" };
        let trip_id = format!("{line_id}{d}-{ymd}-{trip:03}");
        let imputed = rng.random::<f64>() < cfg.apc_imputation_rate;
        out.imputed_trips += u64::from(imputed);
        let dep = net.first_departure_secs + trip * net.headway_secs;
        let mut stops = Vec::with_capacity(counts.len());
        for (idx, (&station, &(b, a))) in net.stops(line, dir).iter().zip(&counts).enumerate() {
            let time = Timestamp(midnight + dep + idx as i64 * net.hop_secs);
            let station_id = net.stations[station].station.station_id.clone();
            let (mut bo, mut al) = (b, a);
            if imputed && cfg.imputation_noise_sigma > 0.0 {
                let s = cfg.imputation_noise_sigma;
                let mut noisy = |c: u32| {
                    let z: f64 = rng.sample(StandardNormal);
                    (f64::from(c) * (s * z - s * s / 2.0).exp()).round() as u32
                };
                bo = noisy(b);
                al = noisy(a);
            }
            out.apc.push(ApcEvent {
                route_id: line_id.clone(),
                trip_id: trip_id.clone(),
                station_id: station_id.clone(),
                timestamp: time,
                boardings: bo,
                alightings: al,
                imputed,
            });
            stops.push(StopLoad {
                station_id,
                time,
                boardings: b,
                alightings: a,
            });
        }
        out.loads.push(TripLoad {
            trip_id,
            route_id: line_id.clone(),
            stops,
        });
    }
    Ok(out)
}

/// Runs the simulation. Deterministic in `(cfg, frame, calendar, seed)`.
pub fn generate(cfg: &SynthConfig, frame: &ProjectionFrame, calendar: &Calendar, seed: u64) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let network = ToyNetwork::build(cfg, frame, &mut rng)?;
    let registry = network.registry()?;
    let demand = Demand::new(&network, cfg)?;
    let days: Vec<DayResult> = (0..cfg.n_days)
        .into_par_iter()
        .map(|d| simulate_day(&network, cfg, &demand, frame, calendar, seed, d))
        .collect::<Result<_>>()?;

    let mut counts = SidecarCounts::default();
    let mut tallies = Tallies::default();
    let mut journeys = Vec::new();
    let mut apc = Vec::new();
    let mut loads = Vec::new();
    for day in days {
        counts.journeys += day.journeys;
        counts.dropped_journeys += day.dropped;
        counts.traced_journeys += day.traced.len() as u64;
        if day.weekday {
            counts.weekdays += 1;
            counts.weekday_journeys += day.journeys;
            counts.traced_weekday_journeys += day.traced.len() as u64;
            counts.weekday_train_legs += day.train_legs;
            counts.traced_weekday_train_legs += day.traced_train_legs;
        }
        counts.imputed_trips += day.imputed_trips;
        counts.apc_trips += day.loads.len() as u64;
        tallies.merge(day.tallies);
        journeys.extend(day.traced);
        apc.extend(day.apc);
        loads.extend(day.loads);
    }
    counts.apc_rows = apc.len() as u64;
    counts.trace_rows = journeys.iter().map(|j| j.legs.len() as u64).sum();

    let planted_features = PlantedFeatures {
        signal: [
            ("boardings".to_string(), PLANTED_SIGNAL_BOARDINGS.to_string()),
            ("alightings".to_string(), PLANTED_SIGNAL_ALIGHTINGS.to_string()),
        ]
        .into(),
        noise: vec![PLANTED_NOISE.to_string()],
        station_size: network
            .stations
            .iter()
            .map(|s| (s.station.station_id.clone(), s.size))
            .collect(),
        origin_breadth: network
            .stations
            .iter()
            .map(|s| (s.station.station_id.clone(), s.home_sites.len()))
            .collect(),
        destination_breadth: network
            .stations
            .iter()
            .map(|s| (s.station.station_id.clone(), s.work_sites.len()))
            .collect(),
        catchment_km: network
            .stations
            .iter()
            .map(|s| (s.station.station_id.clone(), s.catchment_km))
            .collect(),
        cycling_weight: network
            .stations
            .iter()
            .map(|s| (s.station.station_id.clone(), s.cycling_weight))
            .collect(),
    };
    let sidecar = Sidecar {
        counts,
        true_boardings: tallies.boardings,
        true_alightings: tallies.alightings,
        true_od: tallies.od,
        true_access_modes: tallies.access,
        true_egress_modes: tallies.egress,
        true_origin_cells: cell_counts(tallies.origin_cells),
        true_destination_cells: cell_counts(tallies.destination_cells),
        opt_in_ids: journeys.iter().map(|j| j.journey_id.clone()).collect(),
        planted_features,
    };
    Ok(SynthOutput {
        network,
        registry,
        apc,
        journeys,
        loads,
        sidecar,
    })
}

/// Checks that no trip ever carries a negative load and that every trip
/// ends empty. Returns the number of trips checked.
pub fn check_conservation(loads: &[TripLoad]) -> Result<usize> {
    for trip in loads {
        let mut on_board: i64 = 0;
        for s in &trip.stops {
            on_board += i64::from(s.boardings) - i64::from(s.alightings);
            if on_board < 0 {
                return Err(Error::Invariant(format!(
                    "trip {} has negative load at {}",
                    trip.trip_id, s.station_id
                )));
            }
        }
        if on_board != 0 {
            return Err(Error::Invariant(format!(
                "trip {} ends with {on_board} on board",
                trip.trip_id
            )));
        }
    }
    Ok(loads.len())
}

/// Same check on counter rows, grouped by trip in row order. Returns the
/// ids of trips that violate it.
pub fn apc_conservation_violations(events: &[ApcEvent]) -> Vec<String> {
    let mut trips: BTreeMap<&str, Vec<&ApcEvent>> = BTreeMap::new();
    for e in events {
        trips.entry(&e.trip_id).or_default().push(e);
    }
    trips
        .into_iter()
        .filter(|(_, rows)| {
            let mut on_board: i64 = 0;
            for r in rows {
                on_board += i64::from(r.boardings) - i64::from(r.alightings);
                if on_board < 0 {
                    return true;
                }
            }
            on_board != 0
        })
        .map(|(id, _)| id.to_string())
        .collect()
}
