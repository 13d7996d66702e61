use std::collections::BTreeMap;

use serde::Serialize;

/// Named counters for recoverable anomalies (unknown mode labels, skipped
/// legs, dropped keys). Reported in every run manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Warnings(BTreeMap<String, u64>);

impl Warnings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bump(&mut self, key: &str) {
        self.add(key, 1);
    }

    pub fn add(&mut self, key: &str, n: u64) {
        if n == 0 {
            return;
        }
        log::debug!("{key} (+{n})");
        *self.0.entry(key.to_owned()).or_default() += n;
    }

    pub fn get(&self, key: &str) -> u64 {
        self.0.get(key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn merge(&mut self, other: &Warnings) {
        for (k, v) in &other.0 {
            *self.0.entry(k.clone()).or_default() += v;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

pub mod keys {
    pub const UNKNOWN_MODE_LABEL: &str = "unknown_mode_label";
    pub const TRAIN_LEG_MISSING_STATION: &str = "train_leg_missing_station";
    pub const TRAIN_LEG_SAME_STATION: &str = "train_leg_same_station";
    pub const TRAIN_LEG_NONPOSITIVE_DURATION: &str = "train_leg_nonpositive_duration";
    pub const COARSENING_OVERLAP: &str = "coarsening_overlap_tolerated";
    pub const NONPOSITIVE_TRAVEL_TIME: &str = "nonpositive_travel_time";
    pub const ZERO_OD_ROW: &str = "zero_od_row";
    pub const KEYS_ONLY_IN_TRACE: &str = "validation_keys_only_in_trace";
    pub const KEYS_ONLY_IN_APC: &str = "validation_keys_only_in_apc";
    pub const STATION_EXCLUDED_NO_TRACE: &str = "station_excluded_no_trace_data";
    pub const STATION_EXCLUDED_NO_APC: &str = "station_excluded_no_apc_data";
    pub const STATION_NOT_IN_REGISTRY: &str = "station_not_in_registry";
}
