//! Random-forest regression of counter ridership on station profiles.

mod forest;
mod interpret;
mod tree;

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::coverage::{StationProfile, PROFILE_COLUMNS};
use crate::model::ApcEvent;
use crate::warnings::{keys, Warnings};
use crate::{Error, Result};

pub use forest::{Forest, Hyperparameters};
pub use interpret::{
    oob_permutation_importance, partial_dependence, permutation_importance, split_frequency_importance,
};
pub use tree::{Node, RegressionTree};

pub const N_FEATURES: usize = PROFILE_COLUMNS.len();
pub const MIN_STATIONS: usize = 10;
pub const DEFAULT_PDP_GRID: usize = 50;

/// Weekday totals per station.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StationTotals {
    pub boardings: f64,
    pub alightings: f64,
}

pub fn station_totals(apc: &[ApcEvent]) -> BTreeMap<String, StationTotals> {
    let mut out: BTreeMap<String, StationTotals> = BTreeMap::new();
    for e in apc {
        let t = out.entry(e.station_id.clone()).or_default();
        t.boardings += e.boardings as f64;
        t.alightings += e.alightings as f64;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Boardings,
    Alightings,
}

impl Target {
    pub const BOTH: [Target; 2] = [Target::Boardings, Target::Alightings];

    pub fn label(self) -> &'static str {
        match self {
            Target::Boardings => "boardings",
            Target::Alightings => "alightings",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Exclusion {
    pub station_id: String,
    pub reason: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeatureMatrix {
    pub station_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub boardings: Vec<f64>,
    pub alightings: Vec<f64>,
    pub excluded: Vec<Exclusion>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.len()
    }

    pub fn target(&self, t: Target) -> &[f64] {
        match t {
            Target::Boardings => &self.boardings,
            Target::Alightings => &self.alightings,
        }
    }

    pub fn column(&self, f: usize) -> Vec<f64> {
        self.x.iter().map(|r| r[f]).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }
}

/// Joins profiles with counter totals. Stations with an incomplete profile
/// or without counter data are excluded and counted.
pub fn build_features(
    profiles: &[StationProfile],
    apc: &BTreeMap<String, StationTotals>,
    warnings: &mut Warnings,
) -> Result<FeatureMatrix> {
    let mut m = FeatureMatrix {
        station_ids: Vec::new(),
        feature_names: PROFILE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        x: Vec::new(),
        boardings: Vec::new(),
        alightings: Vec::new(),
        excluded: Vec::new(),
    };
    let mut sorted: Vec<&StationProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.station_id.cmp(&b.station_id));
    for p in sorted {
        let Some(t) = apc.get(&p.station_id) else {
            warnings.add(keys::STATION_EXCLUDED_NO_APC, 1);
            m.excluded.push(Exclusion {
                station_id: p.station_id.clone(),
                reason: "no counter data",
            });
            continue;
        };
        let row: Option<Vec<f64>> = p.values().into_iter().collect();
        let Some(row) = row else {
            warnings.add(keys::STATION_EXCLUDED_NO_TRACE, 1);
            m.excluded.push(Exclusion {
                station_id: p.station_id.clone(),
                reason: "incomplete trace profile",
            });
            continue;
        };
        m.station_ids.push(p.station_id.clone());
        m.x.push(row);
        m.boardings.push(t.boardings);
        m.alightings.push(t.alightings);
    }
    for id in apc.keys() {
        if !profiles.iter().any(|p| &p.station_id == id) {
            warnings.add(keys::STATION_EXCLUDED_NO_TRACE, 1);
            m.excluded.push(Exclusion {
                station_id: id.clone(),
                reason: "no trace profile",
            });
        }
    }
    if m.n_rows() < MIN_STATIONS {
        return Err(Error::InsufficientData {
            needed: MIN_STATIONS,
            found: m.n_rows(),
        });
    }
    Ok(m)
}

pub const IMPORTANCE_HEADER: &str = "feature,permutation_importance,split_frequency,rank,oob_permutation_importance";

/// One row per feature, ranked by permutation importance (ties by column
/// order). The out-of-bag column is left empty when not available.
pub fn write_importance<W: Write + ?Sized>(
    w: &mut W,
    names: &[String],
    pfi: &[f64],
    split_freq: &[f64],
    oob: Option<&[f64]>,
) -> std::io::Result<()> {
    let ranks = importance_ranks(pfi);
    let mut order: Vec<usize> = (0..names.len()).collect();
    order.sort_by_key(|&f| ranks[f]);
    writeln!(w, "{IMPORTANCE_HEADER}")?;
    for f in order {
        let o = oob.map(|v| v[f].to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{o}", names[f], pfi[f], split_freq[f], ranks[f])?;
    }
    Ok(())
}

pub const PDP_HEADER: &str = "feature,grid_value,mean_prediction";

pub fn write_pdp<W: Write + ?Sized>(w: &mut W, name: &str, curve: &[(f64, f64)]) -> std::io::Result<()> {
    for (g, v) in curve {
        writeln!(w, "{name},{g},{v}")?;
    }
    Ok(())
}

/// Ranks of each feature under descending importance, 1-based.
pub fn importance_ranks(importance: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..importance.len()).collect();
    order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; importance.len()];
    for (r, &f) in order.iter().enumerate() {
        ranks[f] = r + 1;
    }
    ranks
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TravelMode;

    fn profile(id: &str, k: f64) -> StationProfile {
        let mut access = [0.0; TravelMode::COUNT];
        access[TravelMode::Walking.index()] = 1.0;
        let mut egress = [0.0; TravelMode::COUNT];
        egress[TravelMode::Bus.index()] = 0.5;
        egress[TravelMode::Walking.index()] = 0.5;
        StationProfile {
            station_id: id.into(),
            n_origin: k as usize,
            n_destination: 2 * k as usize,
            gini_origin: Some(0.1 * k),
            gini_destination: Some(0.2),
            rg_origin: Some(1.5),
            rg_destination: Some(k),
            access_modes: access,
            egress_modes: egress,
        }
    }

    fn totals(ids: &[String]) -> BTreeMap<String, StationTotals> {
        ids.iter()
            .enumerate()
            .map(|(i, id)| {
                (
                    id.clone(),
                    StationTotals {
                        boardings: i as f64,
                        alightings: 2.0 * i as f64,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn row_is_hand_concatenation() {
        let ids: Vec<String> = (0..12).map(|i| format!("S{i:02}")).collect();
        let profiles: Vec<_> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| profile(id, i as f64 + 1.0))
            .collect();
        let mut w = Warnings::default();
        let m = build_features(&profiles, &totals(&ids), &mut w).unwrap();
        assert_eq!(m.n_rows(), 12);
        let mut expect = vec![0.0; 16];
        expect[TravelMode::Walking.index()] = 1.0;
        expect[8 + TravelMode::Bus.index()] = 0.5;
        expect[8 + TravelMode::Walking.index()] = 0.5;
        expect.extend([3.0, 6.0, 0.30000000000000004, 0.2, 1.5, 3.0]);
        assert_eq!(m.x[2], expect);
        assert_eq!(m.boardings[2], 2.0);
        assert_eq!(m.alightings[2], 4.0);
        assert!(w.is_empty());
    }

    #[test]
    fn missing_apc_station_is_excluded() {
        let ids: Vec<String> = (0..12).map(|i| format!("S{i:02}")).collect();
        let profiles: Vec<_> = ids.iter().map(|id| profile(id, 1.0)).collect();
        let mut t = totals(&ids);
        t.remove("S05");
        let mut w = Warnings::default();
        let m = build_features(&profiles, &t, &mut w).unwrap();
        assert_eq!(m.n_rows(), 11);
        assert!(!m.station_ids.contains(&"S05".to_string()));
        assert_eq!(m.excluded[0].station_id, "S05");
        assert_eq!(w.get(keys::STATION_EXCLUDED_NO_APC), 1);
    }

    #[test]
    fn too_few_shared_stations() {
        let ids: Vec<String> = (0..9).map(|i| format!("S{i:02}")).collect();
        let profiles: Vec<_> = ids.iter().map(|id| profile(id, 1.0)).collect();
        let err = build_features(&profiles, &totals(&ids), &mut Warnings::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { needed: 10, found: 9 }));
    }

    #[test]
    fn ranks_are_one_based() {
        assert_eq!(importance_ranks(&[0.1, 0.5, 0.1, -1.0]), vec![2, 1, 3, 4]);
    }
}
