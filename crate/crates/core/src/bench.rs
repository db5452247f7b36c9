//! Stage timings versus vehicle count, log-log growth fits, and the
//! partition-count versus density sweep.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::datagen::{generate_frames, generate_timeframe, GenConfig, GenError};
use crate::geo::{distance_matrix, GeoRect};
use crate::partition::{
    connectivity_from_distances, extract_partitions, multihop_closure, union_find_partitions,
    PartitionError,
};
use crate::timeline;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("need at least 3 points with strictly increasing n and positive times")]
    DegenerateInput,
    #[error("vehicle counts must be non-empty and at least 1")]
    BadCounts,
    #[error("density sweep needs at least 10 trials, got {0}")]
    TooFewTrials(usize),
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// Mean per-timeframe wall-clock cost of each stage, in microseconds.
///
/// `export_us` is the cost of serializing the timeline record, which stands
/// in for on-screen rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub n: usize,
    pub distance_us: f64,
    pub closure_us: f64,
    pub extract_us: f64,
    pub export_us: f64,
    pub timeframes_measured: usize,
    pub mean_partitions: f64,
    pub mean_squarings: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensitySample {
    pub n: usize,
    pub density: f64,
    pub mean_partitions: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub seed: u64,
    pub range_m: f64,
    pub rect: GeoRect,
    /// Upper bound on timed timeframes per n; `None` times every frame the
    /// file cap admits.
    pub max_timeframes: Option<usize>,
    pub max_file_kb: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            range_m: crate::DEFAULT_RANGE_M,
            rect: GeoRect::ANN_ARBOR,
            max_timeframes: None,
            max_file_kb: crate::datagen::DEFAULT_MAX_FILE_KB,
        }
    }
}

fn micros(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e6
}

/// Generates a capped dataset per `n` and times distance, closure
/// (threshold plus squaring to fixpoint), extraction, and export on every
/// timeframe. The first timeframe is run once untimed as a warm-up.
pub fn run_benchmark(ns: &[usize], cfg: &BenchConfig) -> Result<Vec<StageTiming>, BenchError> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(BenchError::BadCounts);
    }
    ns.iter().map(|&n| bench_one(n, cfg)).collect()
}

fn bench_one(n: usize, cfg: &BenchConfig) -> Result<StageTiming, BenchError> {
    let gen = GenConfig {
        rect: cfg.rect,
        max_file_kb: cfg.max_file_kb,
        ..GenConfig::new(n, cfg.seed)
    };
    let mut frames = generate_frames(&gen)?;
    if let Some(limit) = cfg.max_timeframes {
        frames.truncate(limit.max(1));
    }

    // Warm-up.
    {
        let d = distance_matrix(&frames[0]);
        let c = connectivity_from_distances(&d, cfg.range_m)?;
        let (closed, _) = multihop_closure(&c);
        extract_partitions(&closed)?;
    }

    let mut total = StageTiming {
        n,
        distance_us: 0.0,
        closure_us: 0.0,
        extract_us: 0.0,
        export_us: 0.0,
        timeframes_measured: frames.len(),
        mean_partitions: 0.0,
        mean_squarings: 0.0,
    };
    let mut sink = Vec::new();
    for frame in &frames {
        let t = Instant::now();
        let d = distance_matrix(frame);
        total.distance_us += micros(t);

        let t = Instant::now();
        let c = connectivity_from_distances(&d, cfg.range_m)?;
        let (closed, trace) = multihop_closure(&c);
        total.closure_us += micros(t);

        let t = Instant::now();
        let assignment = extract_partitions(&closed)?;
        total.extract_us += micros(t);

        let t = Instant::now();
        sink.clear();
        let record = timeline::TimelineRecord {
            timestamp: frame.timestamp(),
            partition_count: assignment.partition_count(),
            vehicles: frame
                .vehicles()
                .iter()
                .zip(assignment.labels())
                .map(|(r, &partition)| timeline::TimelineVehicle {
                    vehicle_id: r.vehicle_id().to_owned(),
                    latitude: r.latitude(),
                    longitude: r.longitude(),
                    partition,
                })
                .collect(),
        };
        timeline::write_record(&mut sink, &record).expect("writing to memory");
        total.export_us += micros(t);

        total.mean_partitions += assignment.partition_count() as f64;
        total.mean_squarings += trace.squarings as f64;
    }
    let k = frames.len() as f64;
    total.distance_us /= k;
    total.closure_us /= k;
    total.extract_us /= k;
    total.export_us /= k;
    total.mean_partitions /= k;
    total.mean_squarings /= k;
    Ok(total)
}

/// Least-squares slope of `ln(time)` against `ln(n)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64, BenchError> {
    if points.len() < 3
        || points
            .windows(2)
            .any(|w| w[0].0.partial_cmp(&w[1].0) != Some(Ordering::Less))
        || points.iter().any(|&(n, t)| !(n > 0.0 && t > 0.0))
    {
        return Err(BenchError::DegenerateInput);
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, t)| (n.ln(), t.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Mean partition count over `trials` independently generated timeframes
/// per vehicle count. Partition counts come from union-find; the closure
/// route is checked against it elsewhere.
pub fn partition_density_sweep(
    ns: &[usize],
    trials: usize,
    cfg: &BenchConfig,
    parallel: bool,
) -> Result<Vec<DensitySample>, BenchError> {
    if trials < 10 {
        return Err(BenchError::TooFewTrials(trials));
    }
    if ns.is_empty() || ns.contains(&0) {
        return Err(BenchError::BadCounts);
    }
    let area = cfg.rect.area_km2();
    ns.iter()
        .map(|&n| {
            let gen = GenConfig {
                rect: cfg.rect,
                ..GenConfig::new(n, cfg.seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
            };
            let count = |trial: usize| -> Result<usize, BenchError> {
                let frame = generate_timeframe(&gen, trial as i64);
                let d = distance_matrix(&frame);
                Ok(union_find_partitions(&d, cfg.range_m)?.partition_count())
            };
            let counts: Vec<usize> = if parallel {
                (0..trials)
                    .into_par_iter()
                    .map(count)
                    .collect::<Result<_, _>>()?
            } else {
                (0..trials).map(count).collect::<Result<_, _>>()?
            };
            Ok(DensitySample {
                n,
                density: n as f64 / area,
                mean_partitions: counts.iter().sum::<usize>() as f64 / trials as f64,
                trials,
            })
        })
        .collect()
}

pub const RESULTS_HEADER: &str =
    "n,density,distance_us,closure_us,extract_us,mean_partitions,trials,export_us";

/// One row of a results CSV. Timing columns are left empty for density
/// sweep rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    pub density: f64,
    pub timings: Option<(f64, f64, f64, f64)>,
    pub mean_partitions: f64,
    pub trials: usize,
}

impl ResultRow {
    pub fn from_timing(t: &StageTiming, area_km2: f64) -> Self {
        Self {
            n: t.n,
            density: t.n as f64 / area_km2,
            timings: Some((t.distance_us, t.closure_us, t.extract_us, t.export_us)),
            mean_partitions: t.mean_partitions,
            trials: t.timeframes_measured,
        }
    }

    pub fn from_density(s: &DensitySample) -> Self {
        Self {
            n: s.n,
            density: s.density,
            timings: None,
            mean_partitions: s.mean_partitions,
            trials: s.trials,
        }
    }
}

pub fn write_results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = match r.timings {
            Some((dist, clo, ext, exp)) => writeln!(
                out,
                "{},{:.6},{:.3},{:.3},{:.3},{:.4},{},{:.3}",
                r.n, r.density, dist, clo, ext, r.mean_partitions, r.trials, exp
            ),
            None => writeln!(
                out,
                "{},{:.6},,,,{:.4},{},",
                r.n, r.density, r.mean_partitions, r.trials
            ),
        };
    }
    out
}
