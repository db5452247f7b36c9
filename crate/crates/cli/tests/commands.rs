use std::fs;
use std::process::Command;

use cvkit::{cmd_bench, cmd_density, cmd_generate, cmd_simulate};
use cvkit_core::bench::{BenchConfig, RESULTS_HEADER};
use cvkit_core::datagen::{GenConfig, TimeframeCount};
use cvkit_core::timeline::read_timeline;

// Three vehicles ~556 m apart along a meridian, one ~10 km away.
const CLUSTER_CSV: &str = "vehicle_id,timestamp,latitude,longitude,speed
a,10,42.3000,-83.7000,10
b,10,42.3050,-83.7000,11
c,10,42.3100,-83.7000,12
far,10,42.2300,-83.6000,0
a,11,42.3001,-83.7000,10
b,11,42.3051,-83.7000,11
c,11,42.3101,-83.7000,12
far,11,42.2301,-83.6000,0
";

#[test]
fn simulate_clustered_frames() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    let output = dir.path().join("out.jsonl");
    fs::write(&input, CLUSTER_CSV).unwrap();

    let summary = cmd_simulate(&input, 1000.0, &output).unwrap();
    assert_eq!((summary.frames, summary.vehicles), (2, 8));
    assert_eq!(summary.mean_partitions, 2.0);
    let timeline = read_timeline(&fs::read_to_string(&output).unwrap()).unwrap();
    assert_eq!(timeline.len(), 2);
    assert_eq!(timeline[0].timestamp, 10);
    assert!(timeline.iter().all(|r| r.partition_count == 2));

    cmd_simulate(&input, 10_000_000.0, &output).unwrap();
    let timeline = read_timeline(&fs::read_to_string(&output).unwrap()).unwrap();
    assert!(timeline.iter().all(|r| r.partition_count == 1));
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gen.csv");
    let cfg = GenConfig {
        n_timeframes: TimeframeCount::Fixed(4),
        ..GenConfig::new(60, 17)
    };
    cmd_generate(&cfg, Some(&input)).unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    cmd_simulate(&input, 1000.0, &a).unwrap();
    cmd_simulate(&input, 1000.0, &b).unwrap();
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn simulate_reports_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(
        &input,
        "vehicle_id,timestamp,latitude,longitude,speed\nv1,1,42.3\n",
    )
    .unwrap();
    let err = cmd_simulate(&input, 1000.0, &dir.path().join("o")).unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("bad.csv") && msg.contains("line 2"), "{msg}");
    assert!(cmd_simulate(&input, 0.0, &dir.path().join("o")).is_err());
}

#[test]
fn bench_and_density_csv() {
    let cfg = BenchConfig {
        max_timeframes: Some(3),
        ..BenchConfig::default()
    };
    let outcome = cmd_bench(&[10, 20, 40], &cfg).unwrap();
    assert_eq!(outcome.timings.len(), 3);
    assert!(outcome.distance_slope.is_some());
    assert_eq!(outcome.csv.lines().next(), Some(RESULTS_HEADER));
    assert_eq!(outcome.csv.lines().count(), 4);

    let (samples, csv) = cmd_density(&[1, 10], 10, &BenchConfig::default(), false).unwrap();
    assert_eq!(samples[0].mean_partitions, 1.0);
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn binary_exit_status() {
    let bin = env!("CARGO_BIN_EXE_cvkit");
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let out = Command::new(bin)
        .args(["generate", "-n", "5", "--timeframes", "2", "-o"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 11);

    let out = Command::new(bin)
        .args(["generate", "-n", "1000000", "--max-kb", "1"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));

    let timeline = dir.path().join("t.jsonl");
    let out = Command::new(bin)
        .args(["simulate", "-i"])
        .arg(&csv)
        .arg("-o")
        .arg(&timeline)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("frames=2 vehicles=10"));
}
