//! Synthetic BSM datasets: vehicles placed uniformly at random inside a
//! rectangle, independently at every timestamp.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bsm::{self, BsmRecord, Timeframe, CSV_HEADER};
use crate::geo::GeoRect;

pub const DEFAULT_MAX_FILE_KB: u64 = 4500;
pub const MAX_SPEED_MPS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("vehicle count must be at least 1")]
    NoVehicles,
    #[error("file cap must be positive")]
    ZeroCap,
    #[error("timeframe count must be at least 1")]
    NoTimeframes,
    #[error("a single timeframe of {n_vehicles} vehicles exceeds the {max_file_kb} KB cap")]
    CapTooSmall { n_vehicles: usize, max_file_kb: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeframeCount {
    /// As many timeframes as fit under the file cap.
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n_vehicles: usize,
    pub rect: GeoRect,
    pub n_timeframes: TimeframeCount,
    pub seed: u64,
    /// Cap in KiB (1024 bytes) applied when `n_timeframes` is `Auto`.
    pub max_file_kb: u64,
}

impl GenConfig {
    pub fn new(n_vehicles: usize, seed: u64) -> Self {
        Self {
            n_vehicles,
            rect: GeoRect::ANN_ARBOR,
            n_timeframes: TimeframeCount::Auto,
            seed,
            max_file_kb: DEFAULT_MAX_FILE_KB,
        }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.n_vehicles == 0 {
            return Err(GenError::NoVehicles);
        }
        if self.max_file_kb == 0 {
            return Err(GenError::ZeroCap);
        }
        if self.n_timeframes == TimeframeCount::Fixed(0) {
            return Err(GenError::NoTimeframes);
        }
        Ok(())
    }

    fn max_bytes(&self) -> usize {
        (self.max_file_kb as usize).saturating_mul(1024)
    }
}

fn quantize(value: f64, scale: f64) -> f64 {
    (value * scale).round() / scale
}

/// Generates the timeframe at timestamp `t`. Each timestamp draws from its
/// own ChaCha stream keyed by `(seed, t)`, so frames are independent and
/// can be produced in any order. Coordinates are rounded to 1e-6 degrees
/// and speeds to 0.01 m/s so the CSV form is compact and lossless.
pub fn generate_timeframe(cfg: &GenConfig, t: i64) -> Timeframe {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(t as u64);
    let (lat_min, lat_max) = cfg.rect.lat_range();
    let (lon_min, lon_max) = cfg.rect.lon_range();
    let vehicles = (0..cfg.n_vehicles)
        .map(|i| {
            let lat = quantize(rng.random_range(lat_min..=lat_max), 1e6);
            let lon = quantize(rng.random_range(lon_min..=lon_max), 1e6);
            let speed = quantize(rng.random_range(0.0..=MAX_SPEED_MPS), 1e2);
            BsmRecord::new(format!("v{i}"), t, lat, lon, speed)
                .expect("generated record within bounds")
        })
        .collect();
    Timeframe::new(t, vehicles).expect("ids unique and timestamps shared")
}

/// Generates a dataset with timestamps 0, 1, 2, ... deciseconds.
pub fn generate_frames(cfg: &GenConfig) -> Result<Vec<Timeframe>, GenError> {
    Ok(generate(cfg)?.1)
}

/// Generates the dataset as CSV text.
pub fn generate_dataset(cfg: &GenConfig) -> Result<String, GenError> {
    Ok(generate(cfg)?.0)
}

fn generate(cfg: &GenConfig) -> Result<(String, Vec<Timeframe>), GenError> {
    cfg.validate()?;
    let mut text = String::new();
    text.push_str(CSV_HEADER);
    text.push('\n');
    let mut frames = Vec::new();
    match cfg.n_timeframes {
        TimeframeCount::Fixed(count) => {
            for t in 0..count as i64 {
                let frame = generate_timeframe(cfg, t);
                append_frame(&mut text, &frame, usize::MAX);
                frames.push(frame);
            }
        }
        TimeframeCount::Auto => {
            let cap = cfg.max_bytes();
            for t in 0.. {
                let frame = generate_timeframe(cfg, t);
                let before = text.len();
                if !append_frame(&mut text, &frame, cap) {
                    text.truncate(before);
                    break;
                }
                frames.push(frame);
            }
            if frames.is_empty() {
                return Err(GenError::CapTooSmall {
                    n_vehicles: cfg.n_vehicles,
                    max_file_kb: cfg.max_file_kb,
                });
            }
        }
    }
    Ok((text, frames))
}

/// Appends rows, stopping early once `cap` bytes would be exceeded.
fn append_frame(text: &mut String, frame: &Timeframe, cap: usize) -> bool {
    for record in frame.vehicles() {
        bsm::write_row(text, record);
        if text.len() > cap {
            return false;
        }
    }
    true
}
