//! Domain types shared by every stage: modes, stations, legs, trip chains and
//! counter events, plus the grid and clock they are expressed in.

mod geo;
mod time;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use geo::{
    haversine_km, snap_to_cell, GridCell, LatLon, ProjectionFrame, CELL_SIZE_M, EARTH_RADIUS_KM, EARTH_RADIUS_M,
};
pub use time::{parse_date, round_to_quarter_hour, Calendar, Timestamp, QUARTER_HOUR_SECS};

use crate::error::{Error, Result};

/// The eight travel modes. Declaration order is the fixed order of every
/// mode vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelMode {
    Bus,
    PrivateCar,
    Cycling,
    Subway,
    Train,
    Tram,
    Walking,
    Unknown,
}

impl TravelMode {
    pub const COUNT: usize = 8;
    pub const ALL: [TravelMode; 8] = [
        TravelMode::Bus,
        TravelMode::PrivateCar,
        TravelMode::Cycling,
        TravelMode::Subway,
        TravelMode::Train,
        TravelMode::Tram,
        TravelMode::Walking,
        TravelMode::Unknown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            TravelMode::Bus => "bus",
            TravelMode::PrivateCar => "private_car",
            TravelMode::Cycling => "cycling",
            TravelMode::Subway => "subway",
            TravelMode::Train => "train",
            TravelMode::Tram => "tram",
            TravelMode::Walking => "walking",
            TravelMode::Unknown => "unknown",
        }
    }

    /// Modes that run inside the public-transport network and carry
    /// boarding/alighting stops.
    pub fn is_pt_vehicle(self) -> bool {
        matches!(
            self,
            TravelMode::Bus | TravelMode::Subway | TravelMode::Train | TravelMode::Tram
        )
    }

    /// Maps a label onto the closed set. The second value is `false` when
    /// the label was not recognised and fell through to `Unknown`.
    ///
    /// "other", "running" and "ferry" are documented members of the
    /// unknown bucket and count as recognised.
    pub fn parse_label(label: &str) -> (TravelMode, bool) {
        let norm = label.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        let mode = match norm.as_str() {
            "bus" => TravelMode::Bus,
            "private_car" | "car" | "privatecar" => TravelMode::PrivateCar,
            "cycling" | "bicycle" | "bike" => TravelMode::Cycling,
            "subway" | "metro" => TravelMode::Subway,
            "train" | "rail" => TravelMode::Train,
            "tram" => TravelMode::Tram,
            "walking" | "walk" => TravelMode::Walking,
            "unknown" | "other" | "running" | "ferry" => TravelMode::Unknown,
            _ => return (TravelMode::Unknown, false),
        };
        (mode, true)
    }
}

impl fmt::Display for TravelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub station_id: String,
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

impl Station {
    pub fn position(&self) -> LatLon {
        LatLon {
            lat: self.lat,
            lon: self.lon,
        }
    }
}

/// Stations of one network keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationRegistry {
    stations: BTreeMap<String, Station>,
}

impl StationRegistry {
    pub fn new(stations: impl IntoIterator<Item = Station>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for s in stations {
            LatLon::new(s.lat, s.lon)?;
            if map.contains_key(&s.station_id) {
                return Err(Error::DuplicateStation(s.station_id));
            }
            map.insert(s.station_id.clone(), s);
        }
        Ok(StationRegistry { stations: map })
    }

    pub fn get(&self, id: &str) -> Option<&Station> {
        self.stations.get(id)
    }

    pub fn require(&self, id: &str) -> Result<&Station> {
        self.get(id).ok_or_else(|| Error::StationNotInRegistry(id.to_owned()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.stations.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// Stations in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Station> {
        self.stations.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.stations.keys().map(String::as_str)
    }
}

/// One single-mode segment of a journey, after privacy coarsening.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leg {
    pub device_day_id: String,
    pub mode: TravelMode,
    pub start_time: Timestamp,
    pub end_time: Timestamp,
    pub start_cell: GridCell,
    pub end_cell: GridCell,
    pub board_station: Option<String>,
    pub alight_station: Option<String>,
    pub route_id: Option<String>,
}

impl Leg {
    pub fn duration_secs(&self) -> i64 {
        self.end_time - self.start_time
    }
}

/// Time-ordered legs of one device-day forming a single door-to-door journey.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripChain {
    pub device_day_id: String,
    pub legs: Vec<Leg>,
}

impl TripChain {
    pub fn first(&self) -> &Leg {
        &self.legs[0]
    }

    pub fn last(&self) -> &Leg {
        &self.legs[self.legs.len() - 1]
    }
}

/// Boardings and alightings of one vehicle trip at one stop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApcEvent {
    pub route_id: String,
    pub trip_id: String,
    pub station_id: String,
    pub timestamp: Timestamp,
    pub boardings: u32,
    pub alightings: u32,
    /// Filled in by the operator from history; analysed like any other row.
    pub imputed: bool,
}
