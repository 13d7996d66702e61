//! Station catchments beyond the rail network.
//!
//! For every station two cell lists are compiled from the train-leg
//! contexts: the chain origins of legs boarding there and the chain
//! destinations of legs alighting there. Each list is summarised by its
//! number of distinct cells `N`, the Gini index `G` of its per-cell counts,
//! and a flow-weighted mean distance `rg` from the cells to the station:
//!
//! ```text
//! rg_k = Σ_i d_ik T_ik / Σ_i T_ik
//! ```
//!
//! where `T_ik` is the number of legs linking cell `i` with station `k` and
//! `d_ik` is the great-circle distance from the cell centroid to the
//! station. Despite the name this is a weighted mean, not the RMS spread
//! usually called radius of gyration.
//!
//! Access and egress mode shares complete the 22-value station profile.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::chains::TrainLegContext;
use crate::error::{Error, Result};
use crate::model::{haversine_km, GridCell, ProjectionFrame, Station, StationRegistry, TravelMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Origin,
    Destination,
}

/// Distinct cells tied to one side of one station, with positive counts,
/// sorted by cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFlowList {
    pub station_id: String,
    pub side: Side,
    pub entries: Vec<(GridCell, u64)>,
}

impl CellFlowList {
    pub fn n_cells(&self) -> usize {
        self.entries.len()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|(_, c)| c).sum()
    }

    fn from_map(station_id: &str, side: Side, map: BTreeMap<GridCell, u64>) -> Self {
        CellFlowList {
            station_id: station_id.to_owned(),
            side,
            entries: map.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationCellFlows {
    pub origin: CellFlowList,
    pub destination: CellFlowList,
}

/// Cell lists for every station in `stations` plus any station a context
/// mentions. Unused stations get empty lists.
pub fn compile_cell_flows<'a>(
    contexts: &[TrainLegContext],
    stations: impl IntoIterator<Item = &'a str>,
) -> BTreeMap<String, StationCellFlows> {
    type Tally = BTreeMap<String, BTreeMap<GridCell, u64>>;
    let mut origin: Tally = BTreeMap::new();
    let mut destination: Tally = BTreeMap::new();
    for s in stations {
        origin.entry(s.to_owned()).or_default();
        destination.entry(s.to_owned()).or_default();
    }
    for c in contexts {
        *origin
            .entry(c.board_station.clone())
            .or_default()
            .entry(c.origin_cell)
            .or_default() += 1;
        destination.entry(c.board_station.clone()).or_default();
        *destination
            .entry(c.alight_station.clone())
            .or_default()
            .entry(c.destination_cell)
            .or_default() += 1;
        origin.entry(c.alight_station.clone()).or_default();
    }
    origin
        .into_iter()
        .zip(destination)
        .map(|((id, o), (id2, d))| {
            debug_assert_eq!(id, id2);
            let flows = StationCellFlows {
                origin: CellFlowList::from_map(&id, Side::Origin, o),
                destination: CellFlowList::from_map(&id, Side::Destination, d),
            };
            (id, flows)
        })
        .collect()
}

/// Gini index via the sorted closed form
/// `G = 2 Σ_i i x_(i) / (n Σ x) − (n + 1) / n`, with `x` ascending and
/// `i` from 1. Equal to the mean-absolute-difference form
/// `Σ_i Σ_j |x_i − x_j| / (2 n² x̄)`.
pub fn gini(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("gini"));
    }
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidValue("gini needs finite non-negative values"));
    }
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let sum: f64 = x.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidValue("gini needs a positive total"));
    }
    let weighted: f64 = x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v).sum();
    Ok((2.0 * weighted / (n * sum) - (n + 1.0) / n).max(0.0))
}

/// Flow-weighted mean distance in km from the cell centroids to the
/// station.
pub fn radius_of_gyration(entries: &CellFlowList, station: &Station, frame: &ProjectionFrame) -> Result<f64> {
    if entries.entries.is_empty() {
        return Err(Error::EmptyInput("radius of gyration"));
    }
    let here = station.position();
    let (mut num, mut den) = (0.0, 0.0);
    for &(cell, count) in &entries.entries {
        let t = count as f64;
        num += haversine_km(frame.cell_centroid(cell), here) * t;
        den += t;
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeCounts {
    pub access: [u64; TravelMode::COUNT],
    pub egress: [u64; TravelMode::COUNT],
}

/// Access-mode counts of legs boarding at each station and egress-mode
/// counts of legs alighting there.
pub fn mode_counts(contexts: &[TrainLegContext]) -> BTreeMap<String, ModeCounts> {
    let mut out: BTreeMap<String, ModeCounts> = BTreeMap::new();
    for c in contexts {
        out.entry(c.board_station.clone()).or_default().access[c.access_mode.index()] += 1;
        out.entry(c.alight_station.clone()).or_default().egress[c.egress_mode.index()] += 1;
    }
    out
}

/// Counts divided by their total; all zeros when there is nothing to
/// divide.
pub fn normalize(counts: &[u64; TravelMode::COUNT]) -> [f64; TravelMode::COUNT] {
    let total: u64 = counts.iter().sum();
    let mut out = [0.0; TravelMode::COUNT];
    if total > 0 {
        for (o, &c) in out.iter_mut().zip(counts) {
            *o = c as f64 / total as f64;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeVectors {
    pub access: [f64; TravelMode::COUNT],
    pub egress: [f64; TravelMode::COUNT],
}

/// Per-station access and egress shares in the fixed mode order.
pub fn mode_vectors(contexts: &[TrainLegContext]) -> BTreeMap<String, ModeVectors> {
    mode_counts(contexts)
        .into_iter()
        .map(|(s, m)| {
            (
                s,
                ModeVectors {
                    access: normalize(&m.access),
                    egress: normalize(&m.egress),
                },
            )
        })
        .collect()
}

/// Catchment and mode summary of one station. Gini and `rg` are `None` for
/// a side with no observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationProfile {
    pub station_id: String,
    pub n_origin: usize,
    pub n_destination: usize,
    pub gini_origin: Option<f64>,
    pub gini_destination: Option<f64>,
    pub rg_origin: Option<f64>,
    pub rg_destination: Option<f64>,
    pub access_modes: [f64; TravelMode::COUNT],
    pub egress_modes: [f64; TravelMode::COUNT],
}

/// Profile column names after `station_id`. This is also the feature order
/// of the ridership model.
pub const PROFILE_COLUMNS: [&str; 22] = [
    "access_bus",
    "access_private_car",
    "access_cycling",
    "access_subway",
    "access_train",
    "access_tram",
    "access_walking",
    "access_unknown",
    "egress_bus",
    "egress_private_car",
    "egress_cycling",
    "egress_subway",
    "egress_train",
    "egress_tram",
    "egress_walking",
    "egress_unknown",
    "n_origin",
    "n_destination",
    "gini_origin",
    "gini_destination",
    "rg_origin",
    "rg_destination",
];

impl StationProfile {
    /// Values in [`PROFILE_COLUMNS`] order; `None` where undefined.
    pub fn values(&self) -> [Option<f64>; 22] {
        let mut v = [None; 22];
        for k in 0..TravelMode::COUNT {
            v[k] = Some(self.access_modes[k]);
            v[TravelMode::COUNT + k] = Some(self.egress_modes[k]);
        }
        v[16] = Some(self.n_origin as f64);
        v[17] = Some(self.n_destination as f64);
        v[18] = self.gini_origin;
        v[19] = self.gini_destination;
        v[20] = self.rg_origin;
        v[21] = self.rg_destination;
        v
    }

    /// `true` when both sides have observations, so every value is defined.
    pub fn is_complete(&self) -> bool {
        self.n_origin > 0 && self.n_destination > 0
    }
}

fn side_metrics(
    list: &CellFlowList,
    station: &Station,
    frame: &ProjectionFrame,
) -> Result<(usize, Option<f64>, Option<f64>)> {
    if list.entries.is_empty() {
        return Ok((0, None, None));
    }
    let counts: Vec<f64> = list.entries.iter().map(|(_, c)| *c as f64).collect();
    Ok((
        list.n_cells(),
        Some(gini(&counts)?),
        Some(radius_of_gyration(list, station, frame)?),
    ))
}

/// One profile per registry station, in id order. Every station a context
/// mentions must be in the registry.
pub fn build_profiles(
    contexts: &[TrainLegContext],
    registry: &StationRegistry,
    frame: &ProjectionFrame,
) -> Result<Vec<StationProfile>> {
    let flows = compile_cell_flows(contexts, registry.ids());
    let modes = mode_counts(contexts);
    flows
        .iter()
        .map(|(id, f)| {
            let station = registry.require(id)?;
            let (n_origin, gini_origin, rg_origin) = side_metrics(&f.origin, station, frame)?;
            let (n_destination, gini_destination, rg_destination) = side_metrics(&f.destination, station, frame)?;
            let m = modes.get(id).copied().unwrap_or_default();
            Ok(StationProfile {
                station_id: id.clone(),
                n_origin,
                n_destination,
                gini_origin,
                gini_destination,
                rg_origin,
                rg_destination,
                access_modes: normalize(&m.access),
                egress_modes: normalize(&m.egress),
            })
        })
        .collect()
}

/// One row per station; undefined values are empty cells. Floats use the
/// shortest representation that parses back to the same bits.
pub fn write_profiles<W: Write>(mut w: W, profiles: &[StationProfile]) -> io::Result<()> {
    writeln!(w, "station_id,{}", PROFILE_COLUMNS.join(","))?;
    for p in profiles {
        write!(w, "{}", p.station_id)?;
        for v in p.values() {
            match v {
                Some(x) => write!(w, ",{x}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}
