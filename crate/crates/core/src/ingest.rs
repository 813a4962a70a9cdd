//! Parsing, validation, cleaning and partitioning of trip datasets.
//!
//! Two CSV schemas are supported: station-based (`sbbs`) with docking
//! station ids at both ends, and dockless (`dbs`) with raw coordinates.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Bounds, GeoPoint, PlaceRef};

pub const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

pub const SBBS_HEADER: [&str; 6] = [
    "bike_id",
    "user_id",
    "start_time",
    "start_station",
    "end_time",
    "end_station",
];

pub const DBS_HEADER: [&str; 8] = [
    "bike_id",
    "company_id",
    "start_time",
    "start_lon",
    "start_lat",
    "end_time",
    "end_lon",
    "end_lat",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schema {
    Sbbs,
    Dbs,
}

impl std::str::FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sbbs" => Ok(Schema::Sbbs),
            "dbs" => Ok(Schema::Dbs),
            other => Err(Error::schema(format!("unknown schema '{other}'"))),
        }
    }
}

/// One ride record. Timestamps are local civil time stored as seconds
/// since the Unix epoch with no timezone arithmetic (single-city data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub trip_id: u64,
    pub origin: PlaceRef,
    pub destination: PlaceRef,
    pub start_time: i64,
    pub end_time: i64,
    pub company_id: Option<u16>,
    pub bike_id_source: Option<String>,
    pub user_id_source: Option<String>,
}

impl Trip {
    pub fn start_date(&self) -> NaiveDate {
        civil_date(self.start_time)
    }
}

/// A parsed row before cleaning; missing or malformed fields stay `None`
/// so the cleaner can count them under the matching drop rule.
#[derive(Debug, Clone)]
pub struct RawTrip {
    pub row_no: usize,
    pub origin: Option<PlaceRef>,
    pub destination: Option<PlaceRef>,
    pub start_time: Option<i64>,
    pub end_time: Option<i64>,
    pub company_id: Option<u16>,
    pub bike_id_source: Option<String>,
    pub user_id_source: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub total_rows: u64,
    pub dropped_missing_time: u64,
    pub dropped_missing_place: u64,
    pub dropped_out_of_bounds: u64,
    pub dropped_inverted_time: u64,
    pub kept: u64,
    /// Set when the cleaned set came out empty; not an error.
    pub empty_result: bool,
}

impl CleaningReport {
    pub fn reconciles(&self) -> bool {
        self.kept
            + self.dropped_missing_time
            + self.dropped_missing_place
            + self.dropped_out_of_bounds
            + self.dropped_inverted_time
            == self.total_rows
    }
}

/// Docking station registry entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub station_id: u32,
    pub station_name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, Default)]
pub struct StationRegistry {
    by_id: BTreeMap<u32, Station>,
}

impl StationRegistry {
    pub fn new(stations: Vec<Station>) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        for s in stations {
            if by_id.insert(s.station_id, s.clone()).is_some() {
                return Err(Error::data(format!(
                    "duplicate station_id {} in registry",
                    s.station_id
                )));
            }
        }
        Ok(StationRegistry { by_id })
    }

    pub fn get(&self, id: u32) -> Option<&Station> {
        self.by_id.get(&id)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Station> {
        self.by_id.values()
    }
}

/// Trips sorted by (start_time, trip_id) with a per-day range index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripSet {
    trips: Vec<Trip>,
    day_index: BTreeMap<NaiveDate, (usize, usize)>,
}

impl TripSet {
    pub fn new(mut trips: Vec<Trip>) -> Self {
        trips.sort_by_key(|t| (t.start_time, t.trip_id));
        let mut day_index = BTreeMap::new();
        let mut start = 0usize;
        while start < trips.len() {
            let date = trips[start].start_date();
            let mut end = start + 1;
            while end < trips.len() && trips[end].start_date() == date {
                end += 1;
            }
            day_index.insert(date, (start, end));
            start = end;
        }
        TripSet { trips, day_index }
    }

    pub fn empty() -> Self {
        TripSet::new(Vec::new())
    }

    pub fn trips(&self) -> &[Trip] {
        &self.trips
    }

    pub fn len(&self) -> usize {
        self.trips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trips.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.day_index.keys().copied()
    }

    pub fn day(&self, date: NaiveDate) -> Option<&[Trip]> {
        self.day_index.get(&date).map(|&(s, e)| &self.trips[s..e])
    }
}

pub fn civil_date(ts: i64) -> NaiveDate {
    DateTime::from_timestamp(ts, 0)
        .expect("timestamp in range")
        .date_naive()
}

pub fn parse_time(s: &str) -> Option<i64> {
    NaiveDateTime::parse_from_str(s.trim(), TIME_FORMAT)
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

pub fn format_time(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .expect("timestamp in range")
        .naive_utc()
        .format(TIME_FORMAT)
        .to_string()
}

fn check_header(got: &csv::StringRecord, want: &[&str], schema: &str) -> Result<()> {
    let got: Vec<&str> = got.iter().map(|f| f.trim()).collect();
    if got != want {
        return Err(Error::schema(format!(
            "header does not match {schema} schema: expected {want:?}, got {got:?}"
        )));
    }
    Ok(())
}

fn parse_coord(lat: &str, lon: &str) -> Option<PlaceRef> {
    let lat: f64 = lat.trim().parse().ok()?;
    let lon: f64 = lon.trim().parse().ok()?;
    let p = GeoPoint::new(lat, lon);
    if !p.is_valid() {
        return None;
    }
    Some(PlaceRef::Coordinate { point: p })
}

fn parse_station(id: &str) -> Option<PlaceRef> {
    let id: u32 = id.trim().parse().ok()?;
    Some(PlaceRef::Station { station_id: id })
}

fn opt_str(s: &str) -> Option<String> {
    let s = s.trim();
    if s.is_empty() {
        None
    } else {
        Some(s.to_string())
    }
}

/// Parse a trip CSV into raw rows. Malformed field values are kept as
/// `None` so cleaning can attribute the drop; an unreadable or mismatched
/// header is a hard schema error.
pub fn parse_trips<R: Read>(reader: R, schema: Schema) -> Result<Vec<RawTrip>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::schema(format!("unreadable header: {e}")))?
        .clone();
    match schema {
        Schema::Sbbs => check_header(&header, &SBBS_HEADER, "sbbs")?,
        Schema::Dbs => check_header(&header, &DBS_HEADER, "dbs")?,
    }

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row_no = i + 2; // 1-based, after the header line
        let rec = match rec {
            Ok(r) => r,
            Err(_) => {
                rows.push(RawTrip {
                    row_no,
                    origin: None,
                    destination: None,
                    start_time: None,
                    end_time: None,
                    company_id: None,
                    bike_id_source: None,
                    user_id_source: None,
                });
                continue;
            }
        };
        let field = |idx: usize| rec.get(idx).unwrap_or("");
        let raw = match schema {
            Schema::Sbbs => RawTrip {
                row_no,
                bike_id_source: opt_str(field(0)),
                user_id_source: opt_str(field(1)),
                start_time: parse_time(field(2)),
                origin: parse_station(field(3)),
                end_time: parse_time(field(4)),
                destination: parse_station(field(5)),
                company_id: None,
            },
            Schema::Dbs => RawTrip {
                row_no,
                bike_id_source: opt_str(field(0)),
                company_id: field(1).trim().parse().ok(),
                start_time: parse_time(field(2)),
                origin: parse_coord(field(4), field(3)),
                end_time: parse_time(field(5)),
                destination: parse_coord(field(7), field(6)),
                user_id_source: None,
            },
        };
        rows.push(raw);
    }
    Ok(rows)
}

/// Parse the station registry CSV (`station_id,station_name,lat,lon`).
pub fn parse_stations<R: Read>(reader: R) -> Result<StationRegistry> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::schema(format!("unreadable header: {e}")))?
        .clone();
    check_header(&header, &["station_id", "station_name", "lat", "lon"], "station registry")?;
    let mut stations = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id: u32 = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::data(format!("bad station_id in registry: {rec:?}")))?;
        let name = rec.get(1).unwrap_or("").trim().to_string();
        let lat: f64 = rec
            .get(2)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::data(format!("bad lat for station {id}")))?;
        let lon: f64 = rec
            .get(3)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::data(format!("bad lon for station {id}")))?;
        stations.push(Station {
            station_id: id,
            station_name: name,
            lat,
            lon,
        });
    }
    StationRegistry::new(stations)
}

fn place_in_bounds(place: &PlaceRef, bounds: &Bounds, registry: Option<&StationRegistry>) -> Option<bool> {
    match place {
        PlaceRef::Coordinate { point } => Some(bounds.contains(*point)),
        PlaceRef::Station { station_id } => match registry {
            // Unresolvable station id is reported as a missing place.
            Some(reg) => reg
                .get(*station_id)
                .map(|s| bounds.contains(GeoPoint::new(s.lat, s.lon))),
            None => Some(true),
        },
    }
}

/// Apply the cleaning rules in order: (a) both times present, (b) both
/// places present and resolvable, (c) both places inside bounds,
/// (d) start_time <= end_time. Each row is counted under the first rule
/// it fails. Kept rows get trip_id = 0-based kept-row ordinal.
pub fn clean_trips(
    raw: &[RawTrip],
    bounds: &Bounds,
    registry: Option<&StationRegistry>,
) -> Result<(TripSet, CleaningReport)> {
    if bounds.is_degenerate() {
        return Err(Error::precondition(format!("degenerate bounds {bounds:?}")));
    }
    let mut report = CleaningReport {
        total_rows: raw.len() as u64,
        ..Default::default()
    };
    let mut kept = Vec::new();
    for row in raw {
        let (start, end) = match (row.start_time, row.end_time) {
            (Some(s), Some(e)) => (s, e),
            _ => {
                report.dropped_missing_time += 1;
                continue;
            }
        };
        let (origin, destination) = match (&row.origin, &row.destination) {
            (Some(o), Some(d)) => (o, d),
            _ => {
                report.dropped_missing_place += 1;
                continue;
            }
        };
        let o_in = place_in_bounds(origin, bounds, registry);
        let d_in = place_in_bounds(destination, bounds, registry);
        match (o_in, d_in) {
            (Some(true), Some(true)) => {}
            (None, _) | (_, None) => {
                report.dropped_missing_place += 1;
                continue;
            }
            _ => {
                report.dropped_out_of_bounds += 1;
                continue;
            }
        }
        if start > end {
            report.dropped_inverted_time += 1;
            continue;
        }
        kept.push(Trip {
            trip_id: kept.len() as u64,
            origin: *origin,
            destination: *destination,
            start_time: start,
            end_time: end,
            company_id: row.company_id,
            bike_id_source: row.bike_id_source.clone(),
            user_id_source: row.user_id_source.clone(),
        });
    }
    report.kept = kept.len() as u64;
    report.empty_result = kept.is_empty();
    debug_assert!(report.reconciles());
    Ok((TripSet::new(kept), report))
}

/// Emit trips in one of the ingest schemas. Missing source ids fall back
/// to synthetic ones derived from the trip_id; a missing company_id is
/// written as 0. Round-trips through parse_trips + clean_trips.
pub fn write_trips_csv<W: std::io::Write>(trips: &[Trip], schema: Schema, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    match schema {
        Schema::Sbbs => {
            wtr.write_record(SBBS_HEADER)?;
            for t in trips {
                let (o, d) = match (t.origin.station_id(), t.destination.station_id()) {
                    (Some(o), Some(d)) => (o, d),
                    _ => {
                        return Err(Error::precondition(format!(
                            "trip {} has no station ids; cannot write sbbs",
                            t.trip_id
                        )))
                    }
                };
                wtr.write_record([
                    t.bike_id_source.clone().unwrap_or_else(|| format!("b{}", t.trip_id)),
                    t.user_id_source.clone().unwrap_or_else(|| format!("u{}", t.trip_id)),
                    format_time(t.start_time),
                    o.to_string(),
                    format_time(t.end_time),
                    d.to_string(),
                ])?;
            }
        }
        Schema::Dbs => {
            wtr.write_record(DBS_HEADER)?;
            for t in trips {
                let (o, d) = match (t.origin.point(), t.destination.point()) {
                    (Some(o), Some(d)) => (o, d),
                    _ => {
                        return Err(Error::precondition(format!(
                            "trip {} has no coordinates; cannot write dbs",
                            t.trip_id
                        )))
                    }
                };
                wtr.write_record([
                    t.bike_id_source.clone().unwrap_or_else(|| format!("b{}", t.trip_id)),
                    t.company_id.unwrap_or(0).to_string(),
                    format_time(t.start_time),
                    format!("{:.7}", o.lon),
                    format!("{:.7}", o.lat),
                    format_time(t.end_time),
                    format!("{:.7}", d.lon),
                    format!("{:.7}", d.lat),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Partition by the civil date of start_time; a trip spanning midnight
/// belongs to its start date.
pub fn split_by_day(trips: &TripSet) -> BTreeMap<NaiveDate, TripSet> {
    trips
        .dates()
        .map(|d| (d, TripSet::new(trips.day(d).unwrap().to_vec())))
        .collect()
}

pub fn split_by_company(trips: &TripSet) -> Result<BTreeMap<u16, TripSet>> {
    let mut buckets: BTreeMap<u16, Vec<Trip>> = BTreeMap::new();
    for t in trips.trips() {
        let company = t.company_id.ok_or_else(|| {
            Error::precondition(format!("trip {} has no company_id", t.trip_id))
        })?;
        buckets.entry(company).or_default().push(t.clone());
    }
    Ok(buckets.into_iter().map(|(c, v)| (c, TripSet::new(v))).collect())
}
