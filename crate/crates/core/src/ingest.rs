//! Readers and writers for the three input files, the privacy-coarsening
//! step that turns raw trace rows into anonymous legs, and the weekday
//! filter that scopes every analysis.
//!
//! All three formats are comma-separated UTF-8 with a fixed header row.
//! Lines starting with `#` are comments; the tool uses them for the run
//! manifest it writes at the top of every file.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use csv::{ReaderBuilder, StringRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    parse_date, round_to_quarter_hour, ApcEvent, Calendar, LatLon, Leg, ProjectionFrame, Station, StationRegistry,
    Timestamp, TravelMode,
};
use crate::warnings::{keys, Warnings};

pub const APC_HEADER: &str = "route_id,trip_id,station_id,timestamp,boardings,alightings,imputed";
pub const TRACE_HEADER: &str = "device_tag,date,mode,start_time,end_time,start_lat,start_lon,end_lat,end_lon,board_station,alight_station,route_id";
pub const STATION_HEADER: &str = "station_id,name,lat,lon";

/// One trace row before coarsening: still carries the device tag and exact
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawLegRecord {
    pub device_tag: String,
    pub date: NaiveDate,
    pub mode: TravelMode,
    pub start_time: Timestamp,
    pub end_time: Timestamp,
    pub start: LatLon,
    pub end: LatLon,
    pub board_station: Option<String>,
    pub alight_station: Option<String>,
    pub route_id: Option<String>,
}

/// Anything that can be placed on the local calendar.
pub trait Timestamped {
    fn timestamp(&self) -> Timestamp;
}

impl Timestamped for ApcEvent {
    fn timestamp(&self) -> Timestamp {
        self.timestamp
    }
}

impl Timestamped for Leg {
    fn timestamp(&self) -> Timestamp {
        self.start_time
    }
}

impl Timestamped for RawLegRecord {
    fn timestamp(&self) -> Timestamp {
        self.start_time
    }
}

/// Keeps Monday to Friday records, in their original order.
pub fn filter_weekdays<T: Timestamped>(items: Vec<T>, calendar: &Calendar) -> Vec<T> {
    items
        .into_iter()
        .filter(|x| calendar.is_weekday(x.timestamp()))
        .collect()
}

struct Rows<'a> {
    path: &'a Path,
    records: Vec<StringRecord>,
}

impl Rows<'_> {
    fn line(rec: &StringRecord) -> u64 {
        rec.position().map_or(0, |p| p.line())
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn read_rows<'a, R: Read>(reader: R, path: &'a Path, header: &str) -> Result<Rows<'a>> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut records = Vec::new();
    let mut seen_header = false;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !seen_header {
            let found = rec.iter().collect::<Vec<_>>().join(",");
            if found != header {
                return Err(Error::Header {
                    path: path.to_owned(),
                    expected: header.to_owned(),
                    found,
                });
            }
            seen_header = true;
            continue;
        }
        let width = header.split(',').count();
        if rec.len() != width {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: Rows::line(&rec),
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        records.push(rec);
    }
    if !seen_header {
        return Err(Error::Header {
            path: path.to_owned(),
            expected: header.to_owned(),
            found: String::new(),
        });
    }
    Ok(Rows { path, records })
}

fn parse_err(path: &Path, rec: &StringRecord, message: String) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line: Rows::line(rec),
        message,
    }
}

fn field<T: std::str::FromStr>(path: &Path, rec: &StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = rec[idx].trim();
    raw.parse()
        .map_err(|_| parse_err(path, rec, format!("cannot parse {name} `{raw}`")))
}

fn optional(rec: &StringRecord, idx: usize) -> Option<String> {
    let v = rec[idx].trim();
    (!v.is_empty()).then(|| v.to_owned())
}

fn time_field(path: &Path, rec: &StringRecord, idx: usize, name: &str, cal: &Calendar) -> Result<Timestamp> {
    cal.parse(&rec[idx])
        .ok_or_else(|| parse_err(path, rec, format!("cannot parse {name} `{}` as ISO-8601", &rec[idx])))
}

fn parse_bool(path: &Path, rec: &StringRecord, idx: usize) -> Result<bool> {
    match rec[idx].trim().to_ascii_lowercase().as_str() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(parse_err(
            path,
            rec,
            format!("cannot parse imputed `{other}` as boolean"),
        )),
    }
}

fn coordinate(path: &Path, rec: &StringRecord, lat_idx: usize) -> Result<LatLon> {
    let lat = field::<f64>(path, rec, lat_idx, "latitude")?;
    let lon = field::<f64>(path, rec, lat_idx + 1, "longitude")?;
    LatLon::new(lat, lon).map_err(|e| parse_err(path, rec, e.to_string()))
}

pub fn parse_station_file(path: &Path) -> Result<StationRegistry> {
    read_stations(open(path)?, path)
}

pub fn read_stations<R: Read>(reader: R, path: &Path) -> Result<StationRegistry> {
    let rows = read_rows(reader, path, STATION_HEADER)?;
    let mut stations = Vec::with_capacity(rows.records.len());
    for rec in &rows.records {
        let id = rec[0].trim();
        if id.is_empty() {
            return Err(parse_err(path, rec, "empty station_id".into()));
        }
        let pos = coordinate(path, rec, 2)?;
        stations.push(Station {
            station_id: id.to_owned(),
            name: rec[1].trim().to_owned(),
            lat: pos.lat,
            lon: pos.lon,
        });
    }
    StationRegistry::new(stations)
}

/// Reads a counter file. When a registry is supplied every station id must
/// be in it.
pub fn parse_apc_file(path: &Path, calendar: &Calendar, registry: Option<&StationRegistry>) -> Result<Vec<ApcEvent>> {
    read_apc(open(path)?, path, calendar, registry)
}

pub fn read_apc<R: Read>(
    reader: R,
    path: &Path,
    calendar: &Calendar,
    registry: Option<&StationRegistry>,
) -> Result<Vec<ApcEvent>> {
    let rows = read_rows(reader, path, APC_HEADER)?;
    let mut out = Vec::with_capacity(rows.records.len());
    for rec in &rows.records {
        let count = |idx: usize, column: &'static str| -> Result<u32> {
            let v: i64 = field(rows.path, rec, idx, column)?;
            if v < 0 {
                return Err(Error::NegativeCount {
                    path: rows.path.to_owned(),
                    line: Rows::line(rec),
                    column,
                });
            }
            u32::try_from(v).map_err(|_| parse_err(rows.path, rec, format!("{column} {v} too large")))
        };
        let station_id = rec[2].trim().to_owned();
        if let Some(reg) = registry {
            if !reg.contains(&station_id) {
                return Err(Error::UnknownStation {
                    path: rows.path.to_owned(),
                    line: Rows::line(rec),
                    station_id,
                });
            }
        }
        out.push(ApcEvent {
            route_id: rec[0].trim().to_owned(),
            trip_id: rec[1].trim().to_owned(),
            station_id,
            timestamp: time_field(rows.path, rec, 3, "timestamp", calendar)?,
            boardings: count(4, "boardings")?,
            alightings: count(5, "alightings")?,
            imputed: parse_bool(rows.path, rec, 6)?,
        });
    }
    Ok(out)
}

/// Reads a raw trace file. Unrecognised mode labels become `Unknown` and
/// bump [`keys::UNKNOWN_MODE_LABEL`].
pub fn parse_trace_file(path: &Path, calendar: &Calendar, warnings: &mut Warnings) -> Result<Vec<RawLegRecord>> {
    read_traces(open(path)?, path, calendar, warnings)
}

pub fn read_traces<R: Read>(
    reader: R,
    path: &Path,
    calendar: &Calendar,
    warnings: &mut Warnings,
) -> Result<Vec<RawLegRecord>> {
    let rows = read_rows(reader, path, TRACE_HEADER)?;
    let mut out = Vec::with_capacity(rows.records.len());
    for rec in &rows.records {
        let date =
            parse_date(&rec[1]).ok_or_else(|| parse_err(path, rec, format!("cannot parse date `{}`", &rec[1])))?;
        let (mode, recognised) = TravelMode::parse_label(&rec[2]);
        if !recognised {
            warnings.bump(keys::UNKNOWN_MODE_LABEL);
        }
        let start_time = time_field(path, rec, 3, "start_time", calendar)?;
        let end_time = time_field(path, rec, 4, "end_time", calendar)?;
        if end_time < start_time {
            return Err(parse_err(path, rec, "end_time precedes start_time".into()));
        }
        out.push(RawLegRecord {
            device_tag: rec[0].trim().to_owned(),
            date,
            mode,
            start_time,
            end_time,
            start: coordinate(path, rec, 5)?,
            end: coordinate(path, rec, 7)?,
            board_station: optional(rec, 9),
            alight_station: optional(rec, 10),
            route_id: optional(rec, 11),
        });
    }
    Ok(out)
}

fn write_preamble<W: Write>(w: &mut W, preamble: &[String]) -> io::Result<()> {
    for line in preamble {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

pub fn write_stations<W: Write>(mut w: W, preamble: &[String], registry: &StationRegistry) -> io::Result<()> {
    write_preamble(&mut w, preamble)?;
    writeln!(w, "{STATION_HEADER}")?;
    let mut cw = csv_writer(w);
    for s in registry.iter() {
        cw.write_record([
            s.station_id.as_str(),
            s.name.as_str(),
            &s.lat.to_string(),
            &s.lon.to_string(),
        ])
        .map_err(csv_io)?;
    }
    cw.flush()
}

pub fn write_apc<W: Write>(mut w: W, preamble: &[String], calendar: &Calendar, events: &[ApcEvent]) -> io::Result<()> {
    write_preamble(&mut w, preamble)?;
    writeln!(w, "{APC_HEADER}")?;
    let mut cw = csv_writer(w);
    for e in events {
        cw.write_record([
            e.route_id.as_str(),
            e.trip_id.as_str(),
            e.station_id.as_str(),
            &calendar.format(e.timestamp),
            &e.boardings.to_string(),
            &e.alightings.to_string(),
            if e.imputed { "true" } else { "false" },
        ])
        .map_err(csv_io)?;
    }
    cw.flush()
}

pub fn write_traces<W: Write>(
    mut w: W,
    preamble: &[String],
    calendar: &Calendar,
    records: &[RawLegRecord],
) -> io::Result<()> {
    write_preamble(&mut w, preamble)?;
    writeln!(w, "{TRACE_HEADER}")?;
    let mut cw = csv_writer(w);
    for r in records {
        cw.write_record([
            r.device_tag.as_str(),
            &r.date.format("%Y-%m-%d").to_string(),
            r.mode.label(),
            &calendar.format(r.start_time),
            &calendar.format(r.end_time),
            &r.start.lat.to_string(),
            &r.start.lon.to_string(),
            &r.end.lat.to_string(),
            &r.end.lon.to_string(),
            r.board_station.as_deref().unwrap_or(""),
            r.alight_station.as_deref().unwrap_or(""),
            r.route_id.as_deref().unwrap_or(""),
        ])
        .map_err(csv_io)?;
    }
    cw.flush()
}

/// Opaque per-device-per-day identifier: the first 12 bytes of
/// SHA-256(seed || device tag || date), hex encoded. The same device on two
/// dates gets unrelated ids.
pub fn device_day_id(device_tag: &str, date: NaiveDate, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((device_tag.len() as u64).to_le_bytes());
    h.update(device_tag.as_bytes());
    h.update(date.format("%Y-%m-%d").to_string().as_bytes());
    let digest = h.finalize();
    digest[..12].iter().map(|b| format!("{b:02x}")).collect()
}

/// Privacy coarsening: replaces device tags with daily ids, snaps every
/// endpoint to the grid, and rounds the timestamps of legs outside the
/// public-transport network to the nearest quarter hour.
///
/// Stop and route fields survive only on PT-vehicle legs.
pub fn anonymize(records: &[RawLegRecord], seed: u64, frame: &ProjectionFrame) -> Result<Vec<Leg>> {
    records
        .iter()
        .map(|r| {
            let pt = r.mode.is_pt_vehicle();
            let (start_time, end_time) = if pt {
                (r.start_time, r.end_time)
            } else {
                (round_to_quarter_hour(r.start_time), round_to_quarter_hour(r.end_time))
            };
            Ok(Leg {
                device_day_id: device_day_id(&r.device_tag, r.date, seed),
                mode: r.mode,
                start_time,
                end_time,
                start_cell: frame.snap_to_cell(r.start)?,
                end_cell: frame.snap_to_cell(r.end)?,
                board_station: if pt { r.board_station.clone() } else { None },
                alight_station: if pt { r.alight_station.clone() } else { None },
                route_id: if pt { r.route_id.clone() } else { None },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GridCell;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    fn cal() -> Calendar {
        Calendar::with_offset_minutes(180).unwrap()
    }

    #[test]
    fn apc_row_maps_fields() {
        let text = format!("{APC_HEADER}\nK,K123,PSL,2021-09-06T08:15:00,12,3,false\n");
        let ev = read_apc(text.as_bytes(), p(), &cal(), None).unwrap();
        assert_eq!(ev.len(), 1);
        let e = &ev[0];
        assert_eq!(
            (e.route_id.as_str(), e.trip_id.as_str(), e.station_id.as_str()),
            ("K", "K123", "PSL")
        );
        assert_eq!((e.boardings, e.alightings, e.imputed), (12, 3, false));
        assert_eq!(cal().format(e.timestamp), "2021-09-06T08:15:00");
    }

    #[test]
    fn header_only_is_empty() {
        let text = format!("{APC_HEADER}\n");
        assert!(read_apc(text.as_bytes(), p(), &cal(), None).unwrap().is_empty());
    }

    #[test]
    fn comments_are_skipped_and_lines_counted() {
        let text = format!("# manifest\n{APC_HEADER}\nK,K1,PSL,2021-09-06T08:15:00,1,1,true\nK,K1,PSL,bad,1,1,true\n");
        match read_apc(text.as_bytes(), p(), &cal(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn apc_errors() {
        let neg = format!("{APC_HEADER}\nK,K1,PSL,2021-09-06T08:15:00,-1,0,false\n");
        assert!(matches!(
            read_apc(neg.as_bytes(), p(), &cal(), None),
            Err(Error::NegativeCount {
                line: 2,
                column: "boardings",
                ..
            })
        ));
        let short = format!("{APC_HEADER}\nK,K1,PSL\n");
        assert!(matches!(
            read_apc(short.as_bytes(), p(), &cal(), None),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad_header = "route,trip\n";
        assert!(matches!(
            read_apc(bad_header.as_bytes(), p(), &cal(), None),
            Err(Error::Header { .. })
        ));
        assert!(matches!(
            read_apc("".as_bytes(), p(), &cal(), None),
            Err(Error::Header { .. })
        ));

        let reg = StationRegistry::new([Station {
            station_id: "HKI".into(),
            name: "Helsinki".into(),
            lat: 60.17,
            lon: 24.94,
        }])
        .unwrap();
        let unknown = format!("{APC_HEADER}\nK,K1,PSL,2021-09-06T08:15:00,1,0,false\n");
        match read_apc(unknown.as_bytes(), p(), &cal(), Some(&reg)) {
            Err(Error::UnknownStation { station_id, line, .. }) => {
                assert_eq!(station_id, "PSL");
                assert_eq!(line, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    const WALK: &str = "dev1,2021-09-06,walking,2021-09-06T12:07:00,2021-09-06T12:20:00,60.17,24.94,60.18,24.95,,,";

    #[test]
    fn trace_rows_and_unknown_modes() {
        let mut w = Warnings::new();
        let text = format!("{TRACE_HEADER}\n{WALK}\n");
        let recs = read_traces(text.as_bytes(), p(), &cal(), &mut w).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].mode, TravelMode::Walking);
        assert!(recs[0].board_station.is_none() && recs[0].route_id.is_none());
        assert_eq!(w.get(keys::UNKNOWN_MODE_LABEL), 0);

        let scooter = WALK.replace("walking", "scooter");
        let text = format!("{TRACE_HEADER}\n{scooter}\n");
        let recs = read_traces(text.as_bytes(), p(), &cal(), &mut w).unwrap();
        assert_eq!(recs[0].mode, TravelMode::Unknown);
        assert_eq!(w.get(keys::UNKNOWN_MODE_LABEL), 1);
    }

    #[test]
    fn trace_rejects_reversed_times_and_bad_coordinates() {
        let mut w = Warnings::new();
        let rev = WALK.replace("12:07:00", "12:30:00");
        let text = format!("{TRACE_HEADER}\n{rev}\n");
        assert!(read_traces(text.as_bytes(), p(), &cal(), &mut w).is_err());
        let bad = WALK.replace("60.17,", "95.0,");
        let text = format!("{TRACE_HEADER}\n{bad}\n");
        assert!(read_traces(text.as_bytes(), p(), &cal(), &mut w).is_err());
    }

    fn raw(device: &str, date: &str, mode: TravelMode, start: &str, end: &str) -> RawLegRecord {
        let c = cal();
        let pt = mode.is_pt_vehicle();
        RawLegRecord {
            device_tag: device.into(),
            date: parse_date(date).unwrap(),
            mode,
            start_time: c.parse(start).unwrap(),
            end_time: c.parse(end).unwrap(),
            start: LatLon { lat: 60.17, lon: 24.94 },
            end: LatLon { lat: 60.2, lon: 24.93 },
            board_station: pt.then(|| "HKI".to_owned()),
            alight_station: pt.then(|| "PSL".to_owned()),
            route_id: pt.then(|| "K".to_owned()),
        }
    }

    fn frame() -> ProjectionFrame {
        ProjectionFrame::new(60.0, 24.5).unwrap()
    }

    #[test]
    fn same_device_same_day_shares_id() {
        let a = raw(
            "d1",
            "2021-09-06",
            TravelMode::Walking,
            "2021-09-06T08:00:00",
            "2021-09-06T08:10:00",
        );
        let b = raw(
            "d1",
            "2021-09-06",
            TravelMode::Train,
            "2021-09-06T08:12:00",
            "2021-09-06T08:20:00",
        );
        let legs = anonymize(&[a, b], 7, &frame()).unwrap();
        assert_eq!(legs[0].device_day_id, legs[1].device_day_id);
    }

    #[test]
    fn consecutive_days_get_distinct_ids() {
        let start = parse_date("2021-09-01").unwrap();
        for seed in [0u64, 1, 99] {
            let mut seen = HashSet::new();
            for dev in 0..1000 {
                let tag = format!("device-{dev}");
                let d1 = device_day_id(&tag, start, seed);
                let d2 = device_day_id(&tag, start.succ_opt().unwrap(), seed);
                assert_ne!(d1, d2);
                assert!(seen.insert(d1));
                assert!(seen.insert(d2));
            }
        }
    }

    #[test]
    fn only_non_pt_legs_are_rounded() {
        let c = cal();
        let walk = raw(
            "d",
            "2021-09-06",
            TravelMode::Walking,
            "2021-09-06T12:07:00",
            "2021-09-06T12:07:00",
        );
        let train = raw(
            "d",
            "2021-09-06",
            TravelMode::Train,
            "2021-09-06T12:07:00",
            "2021-09-06T12:16:00",
        );
        let legs = anonymize(&[walk, train], 1, &frame()).unwrap();
        assert_eq!(c.format(legs[0].start_time), "2021-09-06T12:00:00");
        assert_eq!(c.format(legs[1].start_time), "2021-09-06T12:07:00");
        assert_eq!(c.format(legs[1].end_time), "2021-09-06T12:16:00");
        assert_eq!(legs[1].board_station.as_deref(), Some("HKI"));
        assert_eq!(
            legs[0].start_cell,
            frame().snap_to_cell(LatLon { lat: 60.17, lon: 24.94 }).unwrap()
        );
    }

    #[test]
    fn non_pt_legs_lose_stop_fields() {
        let mut walk = raw(
            "d",
            "2021-09-06",
            TravelMode::Walking,
            "2021-09-06T12:00:00",
            "2021-09-06T12:05:00",
        );
        walk.board_station = Some("X".into());
        let legs = anonymize(&[walk], 1, &frame()).unwrap();
        assert!(legs[0].board_station.is_none());
    }

    #[test]
    fn output_carries_no_raw_fields() {
        let r = raw(
            "secret-device-tag",
            "2021-09-06",
            TravelMode::Bus,
            "2021-09-06T12:00:00",
            "2021-09-06T12:05:00",
        );
        let legs = anonymize(std::slice::from_ref(&r), 3, &frame()).unwrap();
        let json = serde_json::to_string(&legs).unwrap();
        assert!(!json.contains("secret-device-tag"));
        assert!(!json.contains("60.17") && !json.contains("24.94"));
        assert!(!json.contains("lat") && !json.contains("device_tag"));
    }

    #[test]
    fn weekday_filter() {
        let c = cal();
        let mk = |s: &str| ApcEvent {
            route_id: "K".into(),
            trip_id: "1".into(),
            station_id: "A".into(),
            timestamp: c.parse(s).unwrap(),
            boardings: 1,
            alightings: 0,
            imputed: false,
        };
        let kept = filter_weekdays(vec![mk("2021-09-04T10:00:00"), mk("2021-09-06T10:00:00")], &c);
        assert_eq!(kept.len(), 1);
        assert_eq!(c.format(kept[0].timestamp), "2021-09-06T10:00:00");

        // one event at noon on each day of September 2021
        let all: Vec<_> = (1..=30).map(|d| mk(&format!("2021-09-{d:02}T12:00:00"))).collect();
        assert_eq!(filter_weekdays(all, &c).len(), 22);
    }

    fn arb_record() -> impl Strategy<Value = RawLegRecord> {
        (
            "[a-z0-9]{1,12}",
            0u32..60,
            0usize..8,
            0i64..80_000,
            0i64..7200,
            (59.0f64..61.0, 23.0f64..26.0, 59.0f64..61.0, 23.0f64..26.0),
            proptest::option::of("[A-Z]{3}"),
            proptest::option::of("[A-Z]{3}"),
            proptest::option::of("[A-Z][0-9]?"),
        )
            .prop_map(|(tag, day, m, start, dur, (a, b, c, d), bs, al, rt)| {
                let date = parse_date("2021-09-01").unwrap() + chrono::Days::new(u64::from(day));
                let midnight = cal().from_local(date.and_hms_opt(0, 0, 0).unwrap());
                RawLegRecord {
                    device_tag: tag,
                    date,
                    mode: TravelMode::ALL[m],
                    start_time: Timestamp(midnight.0 + start),
                    end_time: Timestamp(midnight.0 + start + dur),
                    start: LatLon { lat: a, lon: b },
                    end: LatLon { lat: c, lon: d },
                    board_station: bs,
                    alight_station: al,
                    route_id: rt,
                }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn trace_serialization_round_trips(recs in proptest::collection::vec(arb_record(), 0..20)) {
            let mut buf = Vec::new();
            write_traces(&mut buf, &["manifest".into()], &cal(), &recs).unwrap();
            let mut w = Warnings::new();
            let back = read_traces(buf.as_slice(), p(), &cal(), &mut w).unwrap();
            prop_assert_eq!(back, recs);
            prop_assert!(w.is_empty());
        }

        #[test]
        fn apc_serialization_round_trips(rows in proptest::collection::vec(
            ("[A-Z]", "[A-Z0-9-]{1,8}", "[A-Z]{3}", 1_600_000_000i64..1_700_000_000, 0u32..5000, 0u32..5000, any::<bool>()), 0..20)) {
            let events: Vec<ApcEvent> = rows.into_iter().map(|(r, t, s, ts, b, a, i)| ApcEvent {
                route_id: r, trip_id: t, station_id: s, timestamp: Timestamp(ts), boardings: b, alightings: a, imputed: i,
            }).collect();
            let mut buf = Vec::new();
            write_apc(&mut buf, &[], &cal(), &events).unwrap();
            let back = read_apc(buf.as_slice(), p(), &cal(), None).unwrap();
            prop_assert_eq!(back, events);
        }

        #[test]
        fn seed_changes_ids_only(recs in proptest::collection::vec(arb_record(), 1..10), s1 in any::<u64>(), s2 in any::<u64>()) {
            prop_assume!(s1 != s2);
            let f = frame();
            let a = anonymize(&recs, s1, &f).unwrap();
            let b = anonymize(&recs, s2, &f).unwrap();
            prop_assert_eq!(&a, &anonymize(&recs, s1, &f).unwrap());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_ne!(&x.device_day_id, &y.device_day_id);
                let mut y2 = y.clone();
                y2.device_day_id = x.device_day_id.clone();
                prop_assert_eq!(x, &y2);
            }
        }
    }

    #[test]
    fn cells_are_deterministic() {
        let f = frame();
        let a = f.snap_to_cell(LatLon { lat: 60.17, lon: 24.94 }).unwrap();
        let b = f.snap_to_cell(LatLon { lat: 60.17, lon: 24.94 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, GridCell::new(0, 0));
    }
}
