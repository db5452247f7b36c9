//! Command implementations behind the `cvkit` binary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use cvkit_core::bench::{
    fit_loglog_slope, partition_density_sweep, run_benchmark, write_results_csv, BenchConfig,
    DensitySample, ResultRow, StageTiming,
};
use cvkit_core::bsm::{group_into_timeframes, parse_bsm_csv};
use cvkit_core::datagen::{generate_dataset, GenConfig};
use cvkit_core::timeline::{simulate_frame, write_header, write_record};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub frames: usize,
    pub vehicles: usize,
    pub mean_partitions: f64,
    pub runtime_ms: f64,
}

impl std::fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "frames={} vehicles={} mean_partitions={:.3} runtime_ms={:.1}",
            self.frames, self.vehicles, self.mean_partitions, self.runtime_ms
        )
    }
}

/// Partitions every timeframe of `input` and writes a timeline to `output`.
pub fn cmd_simulate(input: &Path, range_m: f64, output: &Path) -> Result<SimulateSummary> {
    let start = Instant::now();
    if range_m.is_nan() || range_m <= 0.0 {
        bail!("range must be positive, got {range_m}");
    }
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let records = parse_bsm_csv(&text).with_context(|| format!("{}", input.display()))?;
    let frames = group_into_timeframes(records);

    let file = File::create(output).with_context(|| format!("creating {}", output.display()))?;
    let mut out = BufWriter::new(file);
    write_header(&mut out)?;
    let mut vehicles = 0;
    let mut partitions = 0;
    for frame in &frames {
        let record = simulate_frame(frame, range_m)?;
        vehicles += frame.len();
        partitions += record.partition_count;
        write_record(&mut out, &record)?;
    }
    out.flush()?;
    Ok(SimulateSummary {
        frames: frames.len(),
        vehicles,
        mean_partitions: if frames.is_empty() {
            0.0
        } else {
            partitions as f64 / frames.len() as f64
        },
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn cmd_generate(cfg: &GenConfig, output: Option<&Path>) -> Result<usize> {
    let text = generate_dataset(cfg)?;
    match output {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(text.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub timings: Vec<StageTiming>,
    pub distance_slope: Option<f64>,
    pub closure_slope: Option<f64>,
    pub csv: String,
}

pub fn cmd_bench(ns: &[usize], cfg: &BenchConfig) -> Result<BenchOutcome> {
    let timings = run_benchmark(ns, cfg)?;
    let slope = |pick: fn(&StageTiming) -> f64| {
        let pts: Vec<_> = timings.iter().map(|t| (t.n as f64, pick(t))).collect();
        fit_loglog_slope(&pts).ok()
    };
    let area = cfg.rect.area_km2();
    let rows: Vec<_> = timings
        .iter()
        .map(|t| ResultRow::from_timing(t, area))
        .collect();
    Ok(BenchOutcome {
        distance_slope: slope(|t| t.distance_us),
        closure_slope: slope(|t| t.closure_us),
        csv: write_results_csv(&rows),
        timings,
    })
}

pub fn cmd_density(
    ns: &[usize],
    trials: usize,
    cfg: &BenchConfig,
    parallel: bool,
) -> Result<(Vec<DensitySample>, String)> {
    let samples = partition_density_sweep(ns, trials, cfg, parallel)?;
    let rows: Vec<_> = samples.iter().map(ResultRow::from_density).collect();
    Ok((samples, write_results_csv(&rows)))
}
