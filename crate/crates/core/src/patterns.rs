//! Travel patterns inside the rail network: the station OD matrix, its
//! counter-scaled variant, and travel time, distance and flow
//! distributions.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::chains::TrainLegContext;
use crate::error::{Error, Result};
use crate::model::{haversine_km, StationRegistry};
use crate::warnings::{keys, Warnings};

/// Trip counts between stations; `counts[i][j]` boards at `stations[i]`
/// and alights at `stations[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OdMatrix {
    pub stations: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl OdMatrix {
    /// Zero matrix over the given stations (sorted and deduplicated).
    pub fn zeros<I, S>(stations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let stations: Vec<String> = stations
            .into_iter()
            .map(Into::into)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let n = stations.len();
        OdMatrix {
            stations,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn index_of(&self, station: &str) -> Option<usize> {
        self.stations.binary_search_by(|s| s.as_str().cmp(station)).ok()
    }

    pub fn get(&self, from: &str, to: &str) -> u64 {
        match (self.index_of(from), self.index_of(to)) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.stations.len())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// Nonzero cells as `(from, to, count)` in row-major order.
    pub fn nonzero(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.counts.iter().enumerate().flat_map(move |(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(move |(j, &c)| (self.stations[i].as_str(), self.stations[j].as_str(), c))
        })
    }
}

/// Counts contexts per (board, alight) over the stations they mention.
pub fn build_od(contexts: &[TrainLegContext]) -> OdMatrix {
    let stations = contexts
        .iter()
        .flat_map(|c| [c.board_station.as_str(), c.alight_station.as_str()]);
    build_od_over(contexts, stations)
}

/// Like [`build_od`] but over an explicit station list, which is extended
/// with any station a context mentions.
pub fn build_od_over<'a>(contexts: &[TrainLegContext], stations: impl IntoIterator<Item = &'a str>) -> OdMatrix {
    let all = stations.into_iter().map(str::to_owned).chain(
        contexts
            .iter()
            .flat_map(|c| [c.board_station.clone(), c.alight_station.clone()]),
    );
    let mut od = OdMatrix::zeros(all);
    for c in contexts {
        let i = od.index_of(&c.board_station).expect("station indexed");
        let j = od.index_of(&c.alight_station).expect("station indexed");
        od.counts[i][j] += 1;
    }
    od
}

/// Real-valued OD obtained by spreading counter boardings over the trace
/// destination shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledOd {
    pub stations: Vec<String>,
    pub flows: Vec<Vec<f64>>,
}

/// Row `i` becomes `apc_boardings[i] * T[i] / sum(T[i])`. Rows without trace
/// trips become zero rows and are counted under [`keys::ZERO_OD_ROW`] when
/// the counter saw boardings there.
pub fn scale_od(od: &OdMatrix, apc_boardings: &BTreeMap<String, f64>, warnings: &mut Warnings) -> Result<ScaledOd> {
    let mut flows = Vec::with_capacity(od.stations.len());
    for (station, row) in od.stations.iter().zip(&od.counts) {
        let total: u64 = row.iter().sum();
        if total == 0 {
            if apc_boardings.get(station).is_some_and(|&b| b > 0.0) {
                warnings.bump(keys::ZERO_OD_ROW);
            }
            flows.push(vec![0.0; row.len()]);
            continue;
        }
        let boardings = *apc_boardings
            .get(station)
            .ok_or_else(|| Error::MissingApcStation(station.clone()))?;
        flows.push(row.iter().map(|&c| boardings * c as f64 / total as f64).collect());
    }
    Ok(ScaledOd {
        stations: od.stations.clone(),
        flows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `edges.len() == counts.len() + 1`; bin `k` is `[edges[k], edges[k+1])`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Fixed-width bins starting at zero. Values must be non-negative.
    pub fn fixed_width(values: &[f64], width: f64) -> Self {
        let Some(max) = values.iter().copied().reduce(f64::max) else {
            return Histogram {
                edges: Vec::new(),
                counts: Vec::new(),
            };
        };
        let nbins = (max / width).floor() as usize + 1;
        let mut counts = vec![0; nbins];
        for v in values {
            counts[((v / width).floor() as usize).min(nbins - 1)] += 1;
        }
        Histogram {
            edges: (0..=nbins).map(|k| k as f64 * width).collect(),
            counts,
        }
    }

    /// Power-of-two bins `[1,2), [2,4), ...` for values of at least 1.
    pub fn log2(values: &[f64]) -> Self {
        let Some(max) = values.iter().copied().reduce(f64::max) else {
            return Histogram {
                edges: Vec::new(),
                counts: Vec::new(),
            };
        };
        let bin = |v: f64| v.max(1.0).log2().floor() as usize;
        let nbins = bin(max) + 1;
        let mut counts = vec![0; nbins];
        for &v in values {
            counts[bin(v)] += 1;
        }
        Histogram {
            edges: (0..=nbins).map(|k| 2f64.powi(k as i32)).collect(),
            counts,
        }
    }
}

/// Samples with their mean, extremes and histogram. Empty samples leave
/// the statistics undefined (`None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub values: Vec<f64>,
    pub n: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub histogram: Histogram,
}

impl DistributionSummary {
    fn new(values: Vec<f64>, histogram: Histogram) -> Self {
        let n = values.len();
        let mean = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
        DistributionSummary {
            min: values.iter().copied().reduce(f64::min),
            max: values.iter().copied().reduce(f64::max),
            n,
            mean,
            histogram,
            values,
        }
    }

    /// JSON export: `{mean, max, n, bins}`; `bins` are `{lo, hi, count}`.
    pub fn to_json(&self) -> serde_json::Value {
        let bins: Vec<_> = self
            .histogram
            .counts
            .iter()
            .enumerate()
            .map(|(k, c)| {
                serde_json::json!({
                    "lo": self.histogram.edges[k],
                    "hi": self.histogram.edges[k + 1],
                    "count": c,
                })
            })
            .collect();
        serde_json::json!({
            "mean": self.mean,
            "max": self.max,
            "n": self.n,
            "bins": bins,
        })
    }
}

/// Train-leg durations in minutes, 1-minute bins. Non-positive durations
/// are excluded and counted.
pub fn travel_time_distribution(contexts: &[TrainLegContext], warnings: &mut Warnings) -> DistributionSummary {
    let mut values = Vec::with_capacity(contexts.len());
    for c in contexts {
        let secs = c.duration_secs();
        if secs <= 0 {
            warnings.bump(keys::NONPOSITIVE_TRAVEL_TIME);
            continue;
        }
        values.push(secs as f64 / 60.0);
    }
    let h = Histogram::fixed_width(&values, 1.0);
    DistributionSummary::new(values, h)
}

/// Great-circle distance between board and alight stations, 1-km bins.
pub fn travel_distance_distribution(
    contexts: &[TrainLegContext],
    registry: &StationRegistry,
) -> Result<DistributionSummary> {
    let values = contexts
        .iter()
        .map(|c| {
            let a = registry.require(&c.board_station)?;
            let b = registry.require(&c.alight_station)?;
            Ok(haversine_km(a.position(), b.position()))
        })
        .collect::<Result<Vec<_>>>()?;
    let h = Histogram::fixed_width(&values, 1.0);
    Ok(DistributionSummary::new(values, h))
}

/// Nonzero OD entries in row-major order, log2 bins.
pub fn flow_distribution(od: &OdMatrix) -> DistributionSummary {
    let values: Vec<f64> = od.nonzero().map(|(_, _, c)| c as f64).collect();
    let h = Histogram::log2(&values);
    DistributionSummary::new(values, h)
}

/// Square table with a header row and a leading station column.
pub fn write_od<W: Write>(mut w: W, od: &OdMatrix) -> io::Result<()> {
    write!(w, "station")?;
    for s in &od.stations {
        write!(w, ",{s}")?;
    }
    writeln!(w)?;
    for (s, row) in od.stations.iter().zip(&od.counts) {
        write!(w, "{s}")?;
        for c in row {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_scaled_od<W: Write>(mut w: W, od: &ScaledOd) -> io::Result<()> {
    write!(w, "station")?;
    for s in &od.stations {
        write!(w, ",{s}")?;
    }
    writeln!(w)?;
    for (s, row) in od.stations.iter().zip(&od.flows) {
        write!(w, "{s}")?;
        for c in row {
            write!(w, ",{c:.4}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
