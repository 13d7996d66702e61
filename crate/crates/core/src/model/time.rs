use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const QUARTER_HOUR_SECS: i64 = 900;

/// Unix seconds (UTC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn secs(self) -> i64 {
        self.0
    }
}

impl std::ops::Sub for Timestamp {
    type Output = i64;
    fn sub(self, rhs: Self) -> i64 {
        self.0 - rhs.0
    }
}

/// Rounds to the nearest 900 s boundary; an exact midpoint rounds up.
pub fn round_to_quarter_hour(t: Timestamp) -> Timestamp {
    let rem = t.0.rem_euclid(QUARTER_HOUR_SECS);
    let floor = t.0 - rem;
    if rem * 2 >= QUARTER_HOUR_SECS {
        Timestamp(floor + QUARTER_HOUR_SECS)
    } else {
        Timestamp(floor)
    }
}

/// Fixed-offset local time used for weekday and hour-of-day binning, and for
/// reading and writing the ISO-8601 local timestamps of the file formats.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Calendar {
    pub utc_offset_secs: i32,
}

impl Calendar {
    pub fn with_offset_minutes(minutes: i32) -> Result<Self> {
        if minutes.abs() > 18 * 60 {
            return Err(Error::Config(format!("utc offset {minutes} min out of range")));
        }
        Ok(Calendar {
            utc_offset_secs: minutes * 60,
        })
    }

    pub fn local(&self, t: Timestamp) -> NaiveDateTime {
        DateTime::from_timestamp(t.0 + i64::from(self.utc_offset_secs), 0)
            .expect("timestamp within chrono range")
            .naive_utc()
    }

    pub fn from_local(&self, local: NaiveDateTime) -> Timestamp {
        Timestamp(local.and_utc().timestamp() - i64::from(self.utc_offset_secs))
    }

    pub fn local_date(&self, t: Timestamp) -> NaiveDate {
        self.local(t).date()
    }

    pub fn hour(&self, t: Timestamp) -> u8 {
        self.local(t).hour() as u8
    }

    pub fn weekday(&self, t: Timestamp) -> Weekday {
        self.local(t).weekday()
    }

    pub fn is_weekday(&self, t: Timestamp) -> bool {
        !matches!(self.weekday(t), Weekday::Sat | Weekday::Sun)
    }

    pub fn format(&self, t: Timestamp) -> String {
        self.local(t).format("%Y-%m-%dT%H:%M:%S").to_string()
    }

    pub fn parse(&self, s: &str) -> Option<Timestamp> {
        NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M:%S")
            .ok()
            .map(|dt| self.from_local(dt))
    }
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}
