//! Basic Safety Message records and their CSV form.
//!
//! The CSV layout is fixed at five columns:
//!
//! ```text
//! vehicle_id,timestamp,latitude,longitude,speed
//! v1,100,42.30,-83.70,12.5
//! ```
//!
//! Timestamps are integer deciseconds since the dataset epoch. Vehicle ids
//! are opaque tokens and must not contain commas (no quoting is supported).

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;

pub const CSV_HEADER: &str = "vehicle_id,timestamp,latitude,longitude,speed";

const COLUMNS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    VehicleId,
    Timestamp,
    Latitude,
    Longitude,
    Speed,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::VehicleId => "vehicle_id",
            Field::Timestamp => "timestamp",
            Field::Latitude => "latitude",
            Field::Longitude => "longitude",
            Field::Speed => "speed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BsmError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: {field} out of range")]
    OutOfRange { line: usize, field: Field },
}

/// One cleaned BSM row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsmRecord {
    vehicle_id: String,
    timestamp: i64,
    latitude: f64,
    longitude: f64,
    speed: f64,
}

impl BsmRecord {
    /// Builds a record, rejecting empty ids, coordinates outside WGS-84
    /// bounds, and negative or non-finite speeds.
    pub fn new(
        vehicle_id: impl Into<String>,
        timestamp: i64,
        latitude: f64,
        longitude: f64,
        speed: f64,
    ) -> Result<Self, Field> {
        let vehicle_id = vehicle_id.into();
        if vehicle_id.is_empty() || vehicle_id.contains(',') {
            return Err(Field::VehicleId);
        }
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(Field::Latitude);
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(Field::Longitude);
        }
        if !(speed >= 0.0 && speed.is_finite()) {
            return Err(Field::Speed);
        }
        Ok(Self {
            vehicle_id,
            timestamp,
            latitude,
            longitude,
            speed,
        })
    }

    pub fn vehicle_id(&self) -> &str {
        &self.vehicle_id
    }

    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    pub fn longitude(&self) -> f64 {
        self.longitude
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn position(&self) -> GeoPoint {
        // Bounds were checked at construction.
        GeoPoint::new(self.latitude, self.longitude).expect("record coordinates are validated")
    }
}

/// All vehicles reporting at one timestamp, in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeframe {
    timestamp: i64,
    vehicles: Vec<BsmRecord>,
}

impl Timeframe {
    /// Builds a timeframe from records that must all carry `timestamp` and
    /// have distinct vehicle ids. Returns `None` otherwise.
    pub fn new(timestamp: i64, vehicles: Vec<BsmRecord>) -> Option<Self> {
        if vehicles.iter().any(|r| r.timestamp != timestamp) {
            return None;
        }
        let mut seen = std::collections::HashSet::with_capacity(vehicles.len());
        if !vehicles.iter().all(|r| seen.insert(r.vehicle_id.as_str())) {
            return None;
        }
        Some(Self {
            timestamp,
            vehicles,
        })
    }

    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }

    pub fn vehicles(&self) -> &[BsmRecord] {
        &self.vehicles
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn positions(&self) -> Vec<GeoPoint> {
        self.vehicles.iter().map(BsmRecord::position).collect()
    }
}

/// Parses BSM CSV text. Line numbers in errors are 1-based and count the
/// header. Blank lines are skipped.
pub fn parse_bsm_csv(text: &str) -> Result<Vec<BsmRecord>, BsmError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(BsmError::MalformedRow {
                line: 1,
                reason: format!("expected header `{CSV_HEADER}`, found `{}`", header.trim()),
            })
        }
        None => {
            return Err(BsmError::MalformedRow {
                line: 1,
                reason: "missing header".into(),
            })
        }
    }

    let mut records = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let row = raw.trim_end_matches('\r');
        if row.trim().is_empty() {
            continue;
        }
        records.push(parse_row(row, line)?);
    }
    Ok(records)
}

fn parse_row(row: &str, line: usize) -> Result<BsmRecord, BsmError> {
    let cols: Vec<&str> = row.split(',').map(str::trim).collect();
    if cols.len() != COLUMNS {
        return Err(BsmError::MalformedRow {
            line,
            reason: format!("expected {COLUMNS} columns, found {}", cols.len()),
        });
    }
    let malformed = |field: Field| BsmError::MalformedRow {
        line,
        reason: format!("unparseable {field}"),
    };
    let timestamp: i64 = cols[1].parse().map_err(|_| malformed(Field::Timestamp))?;
    let latitude: f64 = cols[2].parse().map_err(|_| malformed(Field::Latitude))?;
    let longitude: f64 = cols[3].parse().map_err(|_| malformed(Field::Longitude))?;
    let speed: f64 = cols[4].parse().map_err(|_| malformed(Field::Speed))?;
    BsmRecord::new(cols[0], timestamp, latitude, longitude, speed)
        .map_err(|field| BsmError::OutOfRange { line, field })
}

/// Groups records into timeframes sorted by timestamp. A repeated
/// `(vehicle_id, timestamp)` pair keeps the position of its first
/// appearance and the fields of its last.
pub fn group_into_timeframes(records: impl IntoIterator<Item = BsmRecord>) -> Vec<Timeframe> {
    let mut frames: BTreeMap<i64, IndexMap<String, BsmRecord>> = BTreeMap::new();
    for record in records {
        frames
            .entry(record.timestamp)
            .or_default()
            .insert(record.vehicle_id.clone(), record);
    }
    frames
        .into_iter()
        .map(|(timestamp, vehicles)| Timeframe {
            timestamp,
            vehicles: vehicles.into_values().collect(),
        })
        .collect()
}

/// Appends one CSV row (without header) for `record`. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_row(out: &mut String, record: &BsmRecord) {
    let _ = writeln!(
        out,
        "{},{},{},{},{}",
        record.vehicle_id, record.timestamp, record.latitude, record.longitude, record.speed
    );
}

/// Serializes timeframes to CSV, header included.
pub fn write_bsm_csv<'a>(frames: impl IntoIterator<Item = &'a Timeframe>) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for frame in frames {
        for record in &frame.vehicles {
            write_row(&mut out, record);
        }
    }
    out
}
