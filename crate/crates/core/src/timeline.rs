//! Partition timeline export.
//!
//! A timeline file is line-delimited JSON. The first line is the format
//! header `{"format":"cvkit-timeline","version":1}`; each following line is
//! one [`TimelineRecord`]. Partition labels are the integers produced by
//! [`crate::partition`]: two vehicles in the same record share a label iff
//! they can reach each other through multi-hop relays.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::bsm::Timeframe;
use crate::geo::distance_matrix;
use crate::partition::{partition_frame, PartitionError};

pub const FORMAT_NAME: &str = "cvkit-timeline";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineHeader {
    pub format: String,
    pub version: u32,
}

impl Default for TimelineHeader {
    fn default() -> Self {
        Self {
            format: FORMAT_NAME.to_owned(),
            version: FORMAT_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineVehicle {
    pub vehicle_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub partition: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRecord {
    pub timestamp: i64,
    pub partition_count: usize,
    pub vehicles: Vec<TimelineVehicle>,
}

/// Partitions one timeframe into a timeline record.
pub fn simulate_frame(frame: &Timeframe, range_m: f64) -> Result<TimelineRecord, PartitionError> {
    let d = distance_matrix(frame);
    let (assignment, _) = partition_frame(&d, range_m)?;
    let vehicles = frame
        .vehicles()
        .iter()
        .zip(assignment.labels())
        .map(|(r, &partition)| TimelineVehicle {
            vehicle_id: r.vehicle_id().to_owned(),
            latitude: r.latitude(),
            longitude: r.longitude(),
            partition,
        })
        .collect();
    Ok(TimelineRecord {
        timestamp: frame.timestamp(),
        partition_count: assignment.partition_count(),
        vehicles,
    })
}

pub fn write_header<W: Write>(mut out: W) -> io::Result<()> {
    serde_json::to_writer(&mut out, &TimelineHeader::default())?;
    out.write_all(b"\n")
}

pub fn write_record<W: Write>(mut out: W, record: &TimelineRecord) -> io::Result<()> {
    serde_json::to_writer(&mut out, record)?;
    out.write_all(b"\n")
}

#[derive(Debug, thiserror::Error)]
pub enum TimelineReadError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("unsupported timeline header {0:?}")]
    Header(TimelineHeader),
    #[error("empty timeline")]
    Empty,
}

/// Parses a full timeline document.
pub fn read_timeline(text: &str) -> Result<Vec<TimelineRecord>, TimelineReadError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(TimelineReadError::Empty)?;
    let header: TimelineHeader = serde_json::from_str(first)
        .map_err(|source| TimelineReadError::Json { line: 1, source })?;
    if header != TimelineHeader::default() {
        return Err(TimelineReadError::Header(header));
    }
    lines
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| TimelineReadError::Json {
                line: i + 1,
                source,
            })
        })
        .collect()
}
