//! Trip-chain assembly and per-train-leg context extraction.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Calendar, GridCell, Leg, Timestamp, TravelMode, TripChain, QUARTER_HOUR_SECS};
use crate::warnings::{keys, Warnings};

pub const DEFAULT_DWELL_GAP_SECS: i64 = 30 * 60;

/// Largest overlap quarter-hour rounding can introduce between a rounded
/// leg and an unrounded neighbour.
pub const COARSENING_OVERLAP_SECS: i64 = QUARTER_HOUR_SECS / 2;

/// A train leg together with the chain it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainLegContext {
    pub device_day_id: String,
    pub board_station: String,
    pub alight_station: String,
    pub board_time: Timestamp,
    pub alight_time: Timestamp,
    pub origin_cell: GridCell,
    pub destination_cell: GridCell,
    pub access_mode: TravelMode,
    pub egress_mode: TravelMode,
    /// Position of the chain in the assembled chain list.
    pub chain_index: usize,
    /// Position of the train leg within its chain.
    pub leg_index: usize,
    pub route_id: Option<String>,
}

impl TrainLegContext {
    pub fn duration_secs(&self) -> i64 {
        self.alight_time - self.board_time
    }
}

/// Overlap between consecutive legs that quarter-hour rounding can explain:
/// none if both are exact, up to [`COARSENING_OVERLAP_SECS`] otherwise.
fn tolerated_overlap(prev: &Leg, next: &Leg) -> i64 {
    if prev.mode.is_pt_vehicle() && next.mode.is_pt_vehicle() {
        0
    } else {
        COARSENING_OVERLAP_SECS
    }
}

fn in_order(day: &[Leg]) -> bool {
    day.windows(2)
        .all(|w| w[0].end_time - w[1].start_time <= tolerated_overlap(&w[0], &w[1]))
}

/// Splits each device-day's legs into chains at every gap of `dwell_gap_secs`
/// or more.
///
/// Within a device-day, input order is kept when it is already time-ordered
/// up to rounding tolerance; rounding can move a short walk past the start
/// of the train it feeds, so re-sorting would misplace it. Otherwise the legs
/// are sorted by time. Output is ordered by device-day id.
///
/// An overlap of up to [`COARSENING_OVERLAP_SECS`] next to a non-PT leg is
/// treated as a zero gap (counted under [`keys::COARSENING_OVERLAP`]);
/// anything larger is an error.
pub fn assemble_chains(legs: Vec<Leg>, dwell_gap_secs: i64, warnings: &mut Warnings) -> Result<Vec<TripChain>> {
    let mut by_day: BTreeMap<String, Vec<Leg>> = BTreeMap::new();
    for leg in legs {
        by_day.entry(leg.device_day_id.clone()).or_default().push(leg);
    }
    let mut chains = Vec::new();
    for (id, mut day) in by_day {
        if !in_order(&day) {
            day.sort_by_key(|l| (l.start_time, l.end_time));
        }
        let mut current: Vec<Leg> = Vec::new();
        for leg in day {
            if let Some(prev) = current.last() {
                let gap = leg.start_time - prev.end_time;
                if gap < 0 {
                    if -gap > tolerated_overlap(prev, &leg) {
                        return Err(Error::OverlappingLegs(id));
                    }
                    warnings.bump(keys::COARSENING_OVERLAP);
                }
                if gap >= dwell_gap_secs {
                    chains.push(TripChain {
                        device_day_id: id.clone(),
                        legs: std::mem::take(&mut current),
                    });
                }
            }
            current.push(leg);
        }
        if !current.is_empty() {
            chains.push(TripChain {
                device_day_id: id,
                legs: current,
            });
        }
    }
    Ok(chains)
}

/// One context per usable train leg.
///
/// Origin and destination are the first and last cells of the whole chain,
/// so every train leg of a transfer journey shares them. Access and egress
/// are the modes of the adjacent legs, `Unknown` at the chain boundary.
/// Train legs without both stations, with equal stations, or with a
/// non-positive duration are skipped and counted.
pub fn extract_train_contexts(chains: &[TripChain], warnings: &mut Warnings) -> Vec<TrainLegContext> {
    let mut out = Vec::new();
    for (chain_index, chain) in chains.iter().enumerate() {
        if chain.legs.is_empty() {
            continue;
        }
        let origin_cell = chain.first().start_cell;
        let destination_cell = chain.last().end_cell;
        for (i, leg) in chain.legs.iter().enumerate() {
            if leg.mode != TravelMode::Train {
                continue;
            }
            let (Some(board), Some(alight)) = (&leg.board_station, &leg.alight_station) else {
                warnings.bump(keys::TRAIN_LEG_MISSING_STATION);
                continue;
            };
            if board == alight {
                warnings.bump(keys::TRAIN_LEG_SAME_STATION);
                continue;
            }
            if leg.end_time <= leg.start_time {
                warnings.bump(keys::TRAIN_LEG_NONPOSITIVE_DURATION);
                continue;
            }
            let access_mode = if i == 0 {
                TravelMode::Unknown
            } else {
                chain.legs[i - 1].mode
            };
            let egress_mode = chain.legs.get(i + 1).map_or(TravelMode::Unknown, |l| l.mode);
            out.push(TrainLegContext {
                device_day_id: chain.device_day_id.clone(),
                board_station: board.clone(),
                alight_station: alight.clone(),
                board_time: leg.start_time,
                alight_time: leg.end_time,
                origin_cell,
                destination_cell,
                access_mode,
                egress_mode,
                chain_index,
                leg_index: i,
                route_id: leg.route_id.clone(),
            });
        }
    }
    out
}

pub const CONTEXT_HEADER: &str = "device_day_id,chain_index,leg_index,route_id,board_station,alight_station,board_time,alight_time,origin_ix,origin_iy,destination_ix,destination_iy,access_mode,egress_mode";

/// Debug dump of contexts, one per line.
pub fn write_contexts<W: Write>(mut w: W, calendar: &Calendar, contexts: &[TrainLegContext]) -> io::Result<()> {
    writeln!(w, "{CONTEXT_HEADER}")?;
    for c in contexts {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.device_day_id,
            c.chain_index,
            c.leg_index,
            c.route_id.as_deref().unwrap_or(""),
            c.board_station,
            c.alight_station,
            calendar.format(c.board_time),
            calendar.format(c.alight_time),
            c.origin_cell.ix,
            c.origin_cell.iy,
            c.destination_cell.ix,
            c.destination_cell.iy,
            c.access_mode,
            c.egress_mode,
        )?;
    }
    Ok(())
}
