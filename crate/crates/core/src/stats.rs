//! Rank and linear correlation, simple least squares, and the harness that
//! checks trace ridership against counter ridership.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::chains::TrainLegContext;
use crate::error::{Error, Result};
use crate::model::{ApcEvent, Calendar};
use crate::warnings::{keys, Warnings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub coefficient: f64,
    /// Two-sided, from the t approximation with n - 2 degrees of freedom.
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: x.len(),
        });
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Ranks starting at 1; tied values share the average of the ranks they
/// span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn t_test_p(r: f64, n: usize) -> f64 {
    if n <= 2 {
        return 1.0;
    }
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Product-moment correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance"));
    }
    // sqrt of the product keeps r exactly 1 for identical series
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    Ok(Correlation {
        coefficient: r,
        p_value: t_test_p(r, x.len()),
    })
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y)?;
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    pearson(&rx, &ry).map_err(|_| Error::UndefinedCorrelation("zero rank variance"))
}

/// Least-squares line `y = slope * x + intercept`. A constant `y` gives
/// `R² = 0` rather than NaN.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    check_pair(x, y)?;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return Err(Error::SingularFit);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(OlsFit {
        slope,
        intercept,
        r_squared: r_squared(y, &x.iter().map(|a| slope * a + intercept).collect::<Vec<_>>()),
    })
}

/// `1 - SS_res / SS_tot`, defined as 0 when the target is constant.
pub fn r_squared(y: &[f64], predicted: &[f64]) -> f64 {
    let my = mean(y);
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if ss_tot == 0.0 {
        return 0.0;
    }
    let ss_res: f64 = y.iter().zip(predicted).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spatial {
    Route,
    Station,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Temporal {
    /// Summed over every weekday of the period.
    Weekday,
    /// Summed per local hour of day.
    Hour,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    Boardings,
    Alightings,
}

/// Which events a validation series draws on. `Both` stacks boardings and
/// alightings as separate points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSelection {
    Boardings,
    Alightings,
    Both,
}

impl EventSelection {
    fn includes(self, e: Event) -> bool {
        match self {
            EventSelection::Both => true,
            EventSelection::Boardings => e == Event::Boardings,
            EventSelection::Alightings => e == Event::Alightings,
        }
    }
}

impl fmt::Display for Spatial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spatial::Route => "route",
            Spatial::Station => "station",
        })
    }
}

impl fmt::Display for Temporal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Temporal::Weekday => "weekday",
            Temporal::Hour => "hour",
        })
    }
}

impl fmt::Display for EventSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventSelection::Boardings => "boardings",
            EventSelection::Alightings => "alightings",
            EventSelection::Both => "boardings/alightings",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CountKey {
    /// Route id or station id.
    pub unit: String,
    pub hour: Option<u8>,
    pub event: Event,
}

/// Ridership totals keyed by spatial unit, optional hour and event.
pub type CountTable = BTreeMap<CountKey, f64>;

fn add(table: &mut CountTable, unit: &str, hour: Option<u8>, event: Event, n: f64) {
    *table
        .entry(CountKey {
            unit: unit.to_owned(),
            hour,
            event,
        })
        .or_default() += n;
}

/// Counter totals. Imputed rows count like measured rows.
pub fn aggregate_apc(events: &[ApcEvent], calendar: &Calendar, spatial: Spatial, temporal: Temporal) -> CountTable {
    let mut t = CountTable::new();
    for e in events {
        let unit = match spatial {
            Spatial::Route => &e.route_id,
            Spatial::Station => &e.station_id,
        };
        let hour = (temporal == Temporal::Hour).then(|| calendar.hour(e.timestamp));
        add(&mut t, unit, hour, Event::Boardings, f64::from(e.boardings));
        add(&mut t, unit, hour, Event::Alightings, f64::from(e.alightings));
    }
    t
}

/// Trace totals: each train leg is one boarding at its board station and
/// hour, and one alighting at its alight station and hour. Route-level
/// tables skip legs without a route id.
pub fn aggregate_trace(
    contexts: &[TrainLegContext],
    calendar: &Calendar,
    spatial: Spatial,
    temporal: Temporal,
) -> CountTable {
    let mut t = CountTable::new();
    let hour = |ts| (temporal == Temporal::Hour).then(|| calendar.hour(ts));
    for c in contexts {
        let (b_unit, a_unit) = match spatial {
            Spatial::Station => (Some(c.board_station.as_str()), Some(c.alight_station.as_str())),
            Spatial::Route => (c.route_id.as_deref(), c.route_id.as_deref()),
        };
        if let Some(u) = b_unit {
            add(&mut t, u, hour(c.board_time), Event::Boardings, 1.0);
        }
        if let Some(u) = a_unit {
            add(&mut t, u, hour(c.alight_time), Event::Alightings, 1.0);
        }
    }
    t
}

/// Paired trace/counter observations on shared keys.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    pub labels: Vec<CountKey>,
    /// Trace-side counts.
    pub x: Vec<f64>,
    /// Counter-side counts.
    pub y: Vec<f64>,
}

/// Aligns two tables for one event selection.
///
/// Spatial units seen on only one side are dropped and counted in
/// `warnings`. Within a unit present on both sides a missing bucket is a
/// zero count.
pub fn pair_tables(
    trace: &CountTable,
    apc: &CountTable,
    events: EventSelection,
    warnings: &mut Warnings,
) -> PairedSeries {
    let units = |t: &CountTable| -> BTreeSet<String> {
        t.keys()
            .filter(|k| events.includes(k.event))
            .map(|k| k.unit.clone())
            .collect()
    };
    let (tu, au) = (units(trace), units(apc));
    warnings.add(keys::KEYS_ONLY_IN_TRACE, tu.difference(&au).count() as u64);
    warnings.add(keys::KEYS_ONLY_IN_APC, au.difference(&tu).count() as u64);
    let shared: BTreeSet<&String> = tu.intersection(&au).collect();
    let keys: BTreeSet<&CountKey> = trace
        .keys()
        .chain(apc.keys())
        .filter(|k| events.includes(k.event) && shared.contains(&k.unit))
        .collect();
    let mut s = PairedSeries {
        labels: Vec::with_capacity(keys.len()),
        x: Vec::with_capacity(keys.len()),
        y: Vec::with_capacity(keys.len()),
    };
    for k in keys {
        s.labels.push(k.clone());
        s.x.push(trace.get(k).copied().unwrap_or(0.0));
        s.y.push(apc.get(k).copied().unwrap_or(0.0));
    }
    s
}

/// One row of the representativeness table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub spatial: Spatial,
    pub temporal: Temporal,
    pub event: EventSelection,
    pub n: usize,
    pub spearman: f64,
    pub spearman_p: f64,
    pub pearson: f64,
    pub pearson_p: f64,
    pub r_squared: f64,
    /// Counter ridership regressed on trace ridership.
    pub slope: f64,
    pub intercept: f64,
}

impl ValidationReport {
    pub fn p_flags(&self) -> String {
        let mut flags = Vec::new();
        if self.spearman_p < 0.001 {
            flags.push("spearman*");
        }
        if self.pearson_p < 0.001 {
            flags.push("pcc*");
        }
        flags.join(";")
    }
}

pub fn validate_series(
    series: &PairedSeries,
    spatial: Spatial,
    temporal: Temporal,
    event: EventSelection,
) -> Result<ValidationReport> {
    if series.x.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: series.x.len(),
        });
    }
    let rho = spearman(&series.x, &series.y)?;
    let r = pearson(&series.x, &series.y)?;
    let fit = ols_fit(&series.x, &series.y)?;
    Ok(ValidationReport {
        spatial,
        temporal,
        event,
        n: series.x.len(),
        spearman: rho.coefficient,
        spearman_p: rho.p_value,
        pearson: r.coefficient,
        pearson_p: r.p_value,
        r_squared: fit.r_squared,
        slope: fit.slope,
        intercept: fit.intercept,
    })
}

/// Compares already-aggregated tables for one combination.
pub fn validate(
    trace: &CountTable,
    apc: &CountTable,
    spatial: Spatial,
    temporal: Temporal,
    event: EventSelection,
    warnings: &mut Warnings,
) -> Result<ValidationReport> {
    let series = pair_tables(trace, apc, event, warnings);
    validate_series(&series, spatial, temporal, event)
}

/// The six combinations reported: route level pools both events, station
/// level splits them.
pub const TABLE_ROWS: [(Spatial, Temporal, EventSelection); 6] = [
    (Spatial::Route, Temporal::Weekday, EventSelection::Both),
    (Spatial::Route, Temporal::Hour, EventSelection::Both),
    (Spatial::Station, Temporal::Weekday, EventSelection::Boardings),
    (Spatial::Station, Temporal::Weekday, EventSelection::Alightings),
    (Spatial::Station, Temporal::Hour, EventSelection::Boardings),
    (Spatial::Station, Temporal::Hour, EventSelection::Alightings),
];

/// Runs every row of [`TABLE_ROWS`]. Inputs should already be restricted to
/// weekdays.
pub fn validate_all(
    contexts: &[TrainLegContext],
    apc: &[ApcEvent],
    calendar: &Calendar,
    warnings: &mut Warnings,
) -> Result<Vec<ValidationReport>> {
    TABLE_ROWS
        .iter()
        .map(|&(s, t, e)| {
            let trace = aggregate_trace(contexts, calendar, s, t);
            let counts = aggregate_apc(apc, calendar, s, t);
            validate(&trace, &counts, s, t, e, warnings)
        })
        .collect()
}

pub const REPORT_HEADER: &str = "spatial,temporal,event,spearman,pcc,r_squared,slope,intercept,n,p_flags";

pub fn write_validation<W: Write>(mut w: W, rows: &[ValidationReport]) -> io::Result<()> {
    writeln!(w, "{REPORT_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.spatial,
            r.temporal,
            r.event,
            r.spearman,
            r.pearson,
            r.r_squared,
            r.slope,
            r.intercept,
            r.n,
            r.p_flags()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Textbook formula, written independently of the implementation above:
    /// r = (n Σxy − Σx Σy) / sqrt((n Σx² − (Σx)²)(n Σy² − (Σy)²)).
    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(
            spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap().coefficient,
            1.0
        );
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().coefficient, -1.0);
    }

    #[test]
    fn spearman_with_ties_hand_ranked() {
        // x = [1,2,2,4] -> ranks [1, 2.5, 2.5, 4]; y = [2,1,3,4] -> ranks [2,1,3,4]
        // mean rank 2.5; dx = [-1.5,0,0,1.5], dy = [-0.5,-1.5,0.5,1.5]
        // Σdxdy = 0.75 + 2.25 = 3; Σdx² = 4.5; Σdy² = 5
        // rho = 3 / sqrt(22.5) = 0.632455532...
        let rho = spearman(&[1.0, 2.0, 2.0, 4.0], &[2.0, 1.0, 3.0, 4.0]).unwrap();
        assert!((rho.coefficient - 3.0 / 22.5_f64.sqrt()).abs() < 1e-12);
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn spearman_zero_rank_variance() {
        assert!(matches!(
            spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(spearman(&[1.0], &[1.0]), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 5.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap().coefficient - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap().coefficient + 1.0).abs() < 1e-15);
        assert!(matches!(pearson(&x, &[3.0; 4]), Err(Error::UndefinedCorrelation(_))));
    }

    #[test]
    fn pearson_matches_textbook_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20);
        let x: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..100.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 0.5 + rng.random_range(-20.0..20.0)).collect();
        let r = pearson(&x, &y).unwrap().coefficient;
        assert!((r - pearson_oracle(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn p_value_known_case() {
        // r = 0.5, n = 12: t = 0.5*sqrt(10/0.75) = 1.825742; two-sided p with
        // 10 df = 0.097855 (scipy.stats.t.sf(1.825742, 10) * 2)
        let p = t_test_p(0.5, 12);
        assert!((p - 0.097_855).abs() < 1e-5, "{p}");
        assert_eq!(t_test_p(1.0, 10), 0.0);
    }

    #[test]
    fn ols_examples() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 5.0).collect();
        let f = ols_fit(&x, &y).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12 && (f.intercept - 5.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);

        let f = ols_fit(&x, &[7.0; 5]).unwrap();
        assert_eq!((f.slope, f.r_squared), (0.0, 0.0));
        assert!(matches!(ols_fit(&[2.0; 3], &[1.0, 2.0, 3.0]), Err(Error::SingularFit)));
    }

    fn table(entries: &[(&str, Option<u8>, Event, f64)]) -> CountTable {
        entries
            .iter()
            .map(|(u, h, e, n)| {
                (
                    CountKey {
                        unit: (*u).into(),
                        hour: *h,
                        event: *e,
                    },
                    *n,
                )
            })
            .collect()
    }

    #[test]
    fn identical_tables_validate_perfectly() {
        let t = table(&[
            ("A", None, Event::Boardings, 10.0),
            ("B", None, Event::Boardings, 30.0),
            ("C", None, Event::Boardings, 20.0),
        ]);
        let r = validate(
            &t,
            &t,
            Spatial::Station,
            Temporal::Weekday,
            EventSelection::Boardings,
            &mut Warnings::new(),
        )
        .unwrap();
        assert_eq!((r.spearman, r.n), (1.0, 3));
        assert!((r.pearson - 1.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert!((r.slope - 1.0).abs() < 1e-12 && r.intercept.abs() < 1e-9);
    }

    #[test]
    fn scaled_trace_recovers_slope() {
        let apc = table(&[
            ("A", None, Event::Boardings, 400.0),
            ("B", None, Event::Boardings, 1200.0),
            ("C", None, Event::Boardings, 800.0),
            ("D", None, Event::Boardings, 40.0),
        ]);
        let trace: CountTable = apc.iter().map(|(k, v)| (k.clone(), v / 40.0)).collect();
        let r = validate(
            &trace,
            &apc,
            Spatial::Station,
            Temporal::Weekday,
            EventSelection::Boardings,
            &mut Warnings::new(),
        )
        .unwrap();
        assert!((r.slope - 40.0).abs() < 1e-9);
        assert!((r.pearson - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_sided_units_are_dropped_and_counted() {
        let apc = table(&[
            ("A", None, Event::Boardings, 4.0),
            ("B", None, Event::Boardings, 12.0),
            ("C", None, Event::Boardings, 8.0),
            ("LEN", None, Event::Boardings, 50.0),
        ]);
        let trace = table(&[
            ("A", None, Event::Boardings, 1.0),
            ("B", None, Event::Boardings, 3.0),
            ("C", None, Event::Boardings, 2.0),
        ]);
        let mut w = Warnings::new();
        let r = validate(
            &trace,
            &apc,
            Spatial::Station,
            Temporal::Weekday,
            EventSelection::Boardings,
            &mut w,
        )
        .unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(w.get(keys::KEYS_ONLY_IN_APC), 1);
    }

    #[test]
    fn missing_hour_within_shared_unit_is_zero() {
        let apc = table(&[
            ("A", Some(7), Event::Boardings, 40.0),
            ("A", Some(8), Event::Boardings, 80.0),
            ("B", Some(8), Event::Boardings, 20.0),
        ]);
        let trace = table(&[
            ("A", Some(8), Event::Boardings, 2.0),
            ("B", Some(8), Event::Boardings, 1.0),
        ]);
        let s = pair_tables(&trace, &apc, EventSelection::Boardings, &mut Warnings::new());
        assert_eq!(s.x, vec![0.0, 2.0, 1.0]);
        assert_eq!(s.y, vec![40.0, 80.0, 20.0]);
    }

    #[test]
    fn too_few_shared_keys() {
        let apc = table(&[("A", None, Event::Boardings, 4.0), ("B", None, Event::Boardings, 5.0)]);
        let trace = table(&[("A", None, Event::Boardings, 1.0)]);
        assert!(matches!(
            validate(
                &trace,
                &apc,
                Spatial::Station,
                Temporal::Weekday,
                EventSelection::Boardings,
                &mut Warnings::new()
            ),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn both_stacks_events() {
        let t = table(&[
            ("K", None, Event::Boardings, 10.0),
            ("K", None, Event::Alightings, 9.0),
            ("I", None, Event::Boardings, 5.0),
            ("I", None, Event::Alightings, 6.0),
        ]);
        let s = pair_tables(&t, &t, EventSelection::Both, &mut Warnings::new());
        assert_eq!(s.x.len(), 4);
    }

    fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..1000.0, n),
                proptest::collection::vec(0.0f64..1000.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn spearman_invariant_under_monotone_maps((x, y) in series()) {
            let Ok(base) = spearman(&x, &y) else { return Ok(()); };
            let fx: Vec<f64> = x.iter().map(|v| (v / 100.0).exp()).collect();
            let gy: Vec<f64> = y.iter().map(|v| 3.0 * v + 7.0).collect();
            let mapped = spearman(&fx, &gy).unwrap();
            prop_assert!((base.coefficient - mapped.coefficient).abs() < 1e-12);
        }

        #[test]
        fn pearson_affine_invariant_and_symmetric((x, y) in series(), a in 0.1f64..50.0, b in -100.0f64..100.0) {
            let Ok(base) = pearson(&x, &y) else { return Ok(()); };
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&ax, &y).unwrap().coefficient - base.coefficient).abs() < 1e-12);
            prop_assert_eq!(pearson(&y, &x).unwrap().coefficient, base.coefficient);
            prop_assert!((-1.0..=1.0).contains(&base.coefficient));
            prop_assert!((base.coefficient - pearson_oracle(&x, &y)).abs() < 1e-9);
        }

        #[test]
        fn ols_r_squared_is_pearson_squared((x, y) in series()) {
            let Ok(r) = pearson(&x, &y) else { return Ok(()); };
            let f = ols_fit(&x, &y).unwrap();
            prop_assert!((f.r_squared - r.coefficient * r.coefficient).abs() < 1e-9);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&f.r_squared));
        }
    }
}
