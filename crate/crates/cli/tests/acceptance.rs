//! Acceptance suite. Runs every criterion in sequence (timing-sensitive
//! criteria must not share the machine with other tests), prints one
//! PASS/FAIL line per criterion, and exits non-zero if any fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cvkit_core::bench::{fit_loglog_slope, partition_density_sweep, run_benchmark, BenchConfig};
use cvkit_core::geo::{haversine_distance, rectangle_area, DistanceMatrix, GeoPoint, GeoRect};
use cvkit_core::partition::{
    boolean_square, connectivity_from_distances, extract_partitions, multihop_closure,
    squaring_bound, union_find_partitions,
};
use cvkit_spat::codec::{
    encode_spat_packet, interpret_state, parse_spat_packet, PhaseColor, SpatError, BASE_LEN,
    PEDESTRIAN_LEN,
};
use cvkit_spat::cycle::{CycleSpec, CycleStep};
use cvkit_spat::emulator::{emulate_controller, EmulatorConfig, TransitionLog};
use cvkit_spat::server::{start_gateway, ServerConfig};
use cvkit_spat::watch::{watch_client, WatchClient};
use cvkit_spat::{IntersectionState, SpatGateway};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// Partitioning

struct Instance {
    n: usize,
    range_m: f64,
    d: DistanceMatrix,
}

/// 1000 seeded frames: n in [1, 50], range in [100, 2000] m, points uniform
/// in a square box whose side varies from 1 to 20 km so instances span
/// isolated, clustered, and fully connected regimes.
fn oracle_instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_13);
    (0..1000)
        .map(|_| {
            let n = rng.random_range(1..=50);
            let range_m = rng.random_range(100.0..=2000.0);
            let side_deg = rng.random_range(0.009..0.18);
            let points: Vec<GeoPoint> = (0..n)
                .map(|_| {
                    GeoPoint::new(
                        42.2 + rng.random_range(0.0..side_deg),
                        -83.8 + rng.random_range(0.0..side_deg * 1.35),
                    )
                    .unwrap()
                })
                .collect();
            Instance {
                n,
                range_m,
                d: DistanceMatrix::from_points(&points),
            }
        })
        .collect()
}

fn criterion_1(instances: &[Instance]) -> Verdict {
    let start = Instant::now();
    let mut mismatches = 0;
    let mut partition_total = 0;
    for inst in instances {
        let c = connectivity_from_distances(&inst.d, inst.range_m).unwrap();
        let (closed, _) = multihop_closure(&c);
        let via_closure = extract_partitions(&closed).unwrap();
        let via_union_find = union_find_partitions(&inst.d, inst.range_m).unwrap();
        partition_total += via_closure.partition_count();
        if via_closure != via_union_find {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!(
            "{} frames, {mismatches} mismatches, mean partitions {:.2}, {:.2} s (limit 10 s)",
            instances.len(),
            partition_total as f64 / instances.len() as f64,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2(instances: &[Instance]) -> Verdict {
    let mut over_bound = 0;
    let mut not_idempotent = 0;
    let mut max_squarings = 0;
    for inst in instances {
        let c = connectivity_from_distances(&inst.d, inst.range_m).unwrap();
        let (closed, trace) = multihop_closure(&c);
        max_squarings = max_squarings.max(trace.squarings);
        if !trace.converged || trace.squarings > squaring_bound(inst.n) {
            over_bound += 1;
        }
        if boolean_square(&closed) != closed {
            not_idempotent += 1;
        }
    }
    verdict(
        over_bound == 0 && not_idempotent == 0,
        format!(
            "{over_bound} over ceil(log2(max(n-1,1)))+1, {not_idempotent} not idempotent, max squarings {max_squarings}"
        ),
    )
}

fn criterion_3() -> Verdict {
    let area = rectangle_area(&GeoRect::ANN_ARBOR);
    let rel = (area - 348.16).abs() / 348.16;
    let mut counts = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [1usize, 10, 200] {
        let points: Vec<GeoPoint> = (0..n)
            .map(|_| {
                GeoPoint::new(rng.random_range(42.2..42.4), rng.random_range(-83.9..-83.5)).unwrap()
            })
            .collect();
        let mut calls = 0usize;
        DistanceMatrix::from_points_with(&points, |a, b| {
            calls += 1;
            haversine_distance(a, b)
        });
        counts.push((n, calls, n * (n - 1) / 2));
    }
    let counts_ok = counts.iter().all(|&(_, got, want)| got == want);
    verdict(
        rel < 0.01 && counts_ok,
        format!(
            "area {area:.3} km2 vs 348.16 ({:.3}% off, limit 1%); evaluations {:?}",
            rel * 100.0,
            counts
                .iter()
                .map(|&(n, got, _)| (n, got))
                .collect::<Vec<_>>()
        ),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let cfg = BenchConfig {
        seed: 4,
        max_timeframes: Some(20),
        ..BenchConfig::default()
    };
    let timings = run_benchmark(&[50, 100, 200, 400, 800], &cfg).unwrap();
    let dist: Vec<_> = timings
        .iter()
        .map(|t| (t.n as f64, t.distance_us))
        .collect();
    let clo: Vec<_> = timings.iter().map(|t| (t.n as f64, t.closure_us)).collect();
    let ds = fit_loglog_slope(&dist).unwrap();
    let cs = fit_loglog_slope(&clo).unwrap();
    let last = timings.last().unwrap();
    let elapsed = start.elapsed();
    let pass = (1.6..=2.4).contains(&ds)
        && cs >= ds
        && last.closure_us > last.distance_us
        && elapsed < Duration::from_secs(300);
    verdict(
        pass,
        format!(
            "distance slope {ds:.3} (want [1.6, 2.4]), closure slope {cs:.3} (want >= distance), \
             n=800 closure {:.0} us vs distance {:.0} us, {:.1} s (limit 300 s)",
            last.closure_us,
            last.distance_us,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Verdict {
    let cfg = BenchConfig {
        seed: 5,
        ..BenchConfig::default()
    };
    let ns = [17, 35, 70, 174, 348];
    let samples = partition_density_sweep(&ns, 50, &cfg, false).unwrap();
    let mean = |n: usize| samples.iter().find(|s| s.n == n).unwrap().mean_partitions;
    let peak = samples
        .iter()
        .max_by(|a, b| a.mean_partitions.total_cmp(&b.mean_partitions))
        .unwrap();
    let curve: Vec<String> = samples
        .iter()
        .map(|s| format!("rho={:.2}:{:.2}", s.density, s.mean_partitions))
        .collect();
    verdict(
        mean(348) < mean(174) && mean(174) >= mean(35),
        format!(
            "{}; peak {:.2} at rho={:.2}; rho=1.0 mean {:.2}",
            curve.join(" "),
            peak.mean_partitions,
            peak.density,
            mean(348)
        ),
    )
}

// ---------------------------------------------------------------------------
// SPaT

fn criterion_6() -> Verdict {
    let mut failures = 0;
    let mut checked = 0;
    let round_trips = |s: &IntersectionState, ped: bool| {
        let bytes = encode_spat_packet(s, ped);
        let frame = parse_spat_packet(&bytes).unwrap();
        bytes.len() == if ped { PEDESTRIAN_LEN } else { BASE_LEN }
            && frame.has_pedestrian_bytes() == ped
            && interpret_state(&frame).as_ref() == Ok(s)
    };
    for step in CycleSpec::default().steps() {
        for ped in [false, true] {
            checked += 1;
            failures += usize::from(!round_trips(&step.phases, ped));
        }
    }
    let colors = [PhaseColor::Red, PhaseColor::Yellow, PhaseColor::Green];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..1000 {
        let phases = std::array::from_fn(|_| colors[rng.random_range(0..3)]);
        checked += 1;
        failures += usize::from(!round_trips(&IntersectionState::new(phases), rng.random()));
    }
    let rejects_243 = parse_spat_packet(&[0u8; 243]) == Err(SpatError::BadLength(243));
    let flag_241 = !parse_spat_packet(&[0u8; 241])
        .unwrap()
        .has_pedestrian_bytes();
    let flag_245 = parse_spat_packet(&[0u8; 245])
        .unwrap()
        .has_pedestrian_bytes();
    verdict(
        failures == 0 && rejects_243 && flag_241 && flag_245,
        format!(
            "{checked} round trips, {failures} failures; 243 rejected: {rejects_243}; \
             241->no pedestrian: {flag_241}; 245->pedestrian: {flag_245}"
        ),
    )
}

fn local_gateway_config() -> ServerConfig {
    ServerConfig {
        udp_addr: "127.0.0.1:0".parse().unwrap(),
        http_addr: "127.0.0.1:0".parse().unwrap(),
        ..ServerConfig::default()
    }
}

/// Expected state changes for the first `packets` packets at 10 Hz (one
/// decisecond per packet), counted from the dwell list: every step entered
/// at a decisecond below `packets` is a change, provided consecutive steps
/// differ and the first differs from the all-red sentinel.
fn expected_changes(dwells_ds: &[u32], packets: u64) -> u64 {
    let mut changes = 0;
    let mut t = 0u64;
    'outer: loop {
        for &d in dwells_ds {
            if t >= packets {
                break 'outer;
            }
            changes += 1;
            t += u64::from(d);
        }
    }
    changes
}

async fn criterion_7() -> Verdict {
    let handle = start_gateway(&local_gateway_config()).await.unwrap();
    let cycle = CycleSpec::default();
    let steps = cycle.steps();
    let distinct = steps
        .iter()
        .zip(steps.iter().cycle().skip(1))
        .all(|(a, b)| a.phases != b.phases)
        && steps[0].phases != IntersectionState::ALL_RED;
    let cfg = EmulatorConfig {
        duration: Some(Duration::from_secs(30)),
        ..EmulatorConfig::new(handle.udp_addr)
    };
    let (_stop_tx, stop_rx) = tokio::sync::watch::channel(false);
    let report = emulate_controller(&cfg, &TransitionLog::default(), None, stop_rx)
        .await
        .unwrap();
    tokio::time::sleep(Duration::from_millis(200)).await;
    let snap = handle.gateway.current_snapshot();
    handle.shutdown().await;

    let dwells: Vec<u32> = steps.iter().map(|s| s.dwell_ds).collect();
    let expected = expected_changes(&dwells, snap.packets_seen);
    let packets_ok = (298..=302).contains(&snap.packets_seen);
    verdict(
        distinct && packets_ok && snap.changes_seen == expected && snap.rejected == 0,
        format!(
            "sent {}, packets_seen {} (want 300 +/- 2), changes_seen {} (expected {expected} from dwells {dwells:?})",
            report.packets_sent, snap.packets_seen, snap.changes_seen
        ),
    )
}

async fn criterion_8() -> Verdict {
    let start = Instant::now();
    let handle = start_gateway(&local_gateway_config()).await.unwrap();
    let url = handle.url();
    // Default phase-pair order with 0.2 s dwells: five transitions a second.
    let cycle = CycleSpec::new(
        CycleSpec::default()
            .steps()
            .iter()
            .map(|s| CycleStep {
                phases: s.phases,
                dwell_ds: 2,
            })
            .collect(),
    )
    .unwrap();
    let run_for = Duration::from_secs(25);

    let pollers: Vec<_> = (0..50)
        .map(|_| {
            let client = WatchClient::new(&url);
            tokio::spawn(async move {
                let deadline = Instant::now() + run_for + Duration::from_secs(1);
                let mut seen = Vec::new();
                let mut since = client.fetch(None).await.unwrap().sequence;
                while Instant::now() < deadline {
                    let doc = client.fetch(Some(since)).await.unwrap();
                    seen.push((doc.sequence, doc.phases));
                    since = doc.sequence;
                }
                seen
            })
        })
        .collect();

    let log = TransitionLog::default();
    let watcher = {
        let (url, log) = (url.clone(), log.clone());
        tokio::spawn(async move {
            watch_client(
                &url,
                run_for + Duration::from_secs(1),
                || log.snapshot(),
                |_, _| {},
            )
            .await
        })
    };
    tokio::time::sleep(Duration::from_millis(300)).await;

    let cfg = EmulatorConfig {
        cycle: cycle.clone(),
        duration: Some(run_for),
        ..EmulatorConfig::new(handle.udp_addr)
    };
    let (_stop_tx, stop_rx) = tokio::sync::watch::channel(false);
    let report = emulate_controller(&cfg, &log, None, stop_rx).await.unwrap();

    let (stats, observations) = watcher.await.unwrap().unwrap();
    let final_seq = handle.gateway.current_snapshot().sequence;

    // Sequence k is the k-th step of the cycle, since every step differs
    // from its predecessor and from the sentinel.
    let steps = cycle.steps();
    let mut bad_pollers = 0;
    let mut poll_counts = Vec::new();
    for p in pollers {
        let seen = p.await.unwrap();
        poll_counts.push(seen.len());
        let monotone = seen.windows(2).all(|w| w[0].0 <= w[1].0);
        let explained = seen.iter().all(|&(seq, phases)| {
            seq <= final_seq
                && (seq == 0 || phases == steps[((seq - 1) % steps.len() as u64) as usize].phases)
        });
        if !monotone || !explained || seen.is_empty() {
            bad_pollers += 1;
        }
    }
    handle.shutdown().await;
    let elapsed = start.elapsed();
    let pass = stats.samples >= 100
        && stats.median_ms < 100.0
        && stats.p95_ms < 250.0
        && bad_pollers == 0
        && elapsed < Duration::from_secs(120);
    verdict(
        pass,
        format!(
            "{} transitions sent, {} observed; median {:.2} ms (<100), p95 {:.2} ms (<250), max {:.2} ms; \
             50 pollers: {bad_pollers} inconsistent, polls per client {}..{}; first seq {:?}; {:.1} s (limit 120 s)",
            report.transitions.len(),
            stats.samples,
            stats.median_ms,
            stats.p95_ms,
            stats.max_ms,
            poll_counts.iter().min().unwrap(),
            poll_counts.iter().max().unwrap(),
            observations.first().map(|o| o.sequence),
            elapsed.as_secs_f64()
        ),
    )
}

/// Read and write syscall counts of the calling thread.
#[cfg(target_os = "linux")]
fn thread_io() -> (u64, u64) {
    let text = std::fs::read_to_string("/proc/thread-self/io").unwrap();
    let field = |name: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(name))
            .and_then(|v| v.trim().parse::<u64>().ok())
            .unwrap()
    };
    (field("syscr:"), field("syscw:"))
}

#[cfg(target_os = "linux")]
fn snapshot_path_io() -> Option<(u64, u64)> {
    let gw = SpatGateway::new();
    let cycle = CycleSpec::default();
    let packets: Vec<_> = cycle
        .steps()
        .iter()
        .map(|s| encode_spat_packet(&s.phases, false))
        .collect();
    let a = thread_io();
    let b = thread_io();
    let before = thread_io();
    for _ in 0..1000 {
        for p in &packets {
            gw.ingest(p, Instant::now());
            std::hint::black_box(gw.current_snapshot());
        }
    }
    let after = thread_io();
    let extra = (
        (after.0 - before.0).saturating_sub(b.0 - a.0),
        (after.1 - before.1).saturating_sub(b.1 - a.1),
    );
    Some(extra)
}

#[cfg(not(target_os = "linux"))]
fn snapshot_path_io() -> Option<(u64, u64)> {
    None
}

async fn criterion_9() -> Verdict {
    let handle = start_gateway(&local_gateway_config()).await.unwrap();
    let udp = tokio::net::UdpSocket::bind("127.0.0.1:0").await.unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    // A known-good state first so the snapshot has something to preserve.
    let anchor = CycleSpec::default().steps()[2].phases;
    udp.send_to(&encode_spat_packet(&anchor, false), handle.udp_addr)
        .await
        .unwrap();
    let mut sent = 1u64;
    let mut valid = 1u64;
    let mut changes = vec![anchor];
    for i in 0..10_000u32 {
        // One in ten has a frame length, so the colour check is reached too.
        let len = match rng.random_range(0..10) {
            0 => [BASE_LEN, PEDESTRIAN_LEN][rng.random_range(0..2)],
            _ => rng.random_range(0..600),
        };
        let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        if (len == BASE_LEN || len == PEDESTRIAN_LEN) && bytes[213] & bytes[215] == 0 {
            valid += 1;
            let state = interpret_state(&parse_spat_packet(&bytes).unwrap()).unwrap();
            if *changes.last().unwrap() != state {
                changes.push(state);
            }
        }
        udp.send_to(&bytes, handle.udp_addr).await.unwrap();
        sent += 1;
        if i % 100 == 99 {
            // Pace sends so the socket buffer never overflows.
            let deadline = Instant::now() + Duration::from_secs(5);
            while handle.gateway.current_snapshot().packets_seen < sent && Instant::now() < deadline
            {
                tokio::time::sleep(Duration::from_millis(1)).await;
            }
        }
    }
    let deadline = Instant::now() + Duration::from_secs(5);
    while handle.gateway.current_snapshot().packets_seen < sent && Instant::now() < deadline {
        tokio::time::sleep(Duration::from_millis(5)).await;
    }

    let client = WatchClient::new(&handle.url());
    let doc = client.fetch(None).await;
    let snap = handle.gateway.current_snapshot();
    let health = handle.gateway.health();
    handle.shutdown().await;

    let serving = doc
        .as_ref()
        .map(|d| d.sequence == snap.sequence && d.phases == snap.state && d.packets_seen == sent)
        .unwrap_or(false);
    let counters_ok = snap.packets_seen == sent
        && snap.rejected == sent - valid
        && snap.changes_seen == changes.len() as u64
        && snap.sequence == snap.changes_seen
        && snap.state == *changes.last().unwrap()
        && health.rejected == snap.rejected;
    let io = snapshot_path_io();
    let no_io = io.is_some_and(|x| x == (0, 0));
    verdict(
        serving && counters_ok && no_io,
        format!(
            "sent {sent}, packets_seen {}, rejected {} (expected {}), changes {} (expected {}), /spat serving: {serving}; \
             extra read/write syscalls on snapshot path: {io:?}",
            snap.packets_seen,
            snap.rejected,
            sent - valid,
            snap.changes_seen,
            changes.len()
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Verdict)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let v = f();
        println!(
            "[{}] {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        results.push((name, v));
    };

    let instances = oracle_instances();
    run("1 oracle equivalence", &mut || criterion_1(&instances));
    run("2 closure bound and idempotence", &mut || {
        criterion_2(&instances)
    });
    run("3 geometry anchor", &mut criterion_3);
    run("4 scaling trends", &mut criterion_4);
    run("5 density curve shape", &mut criterion_5);
    run("6 codec round trip", &mut criterion_6);

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap();
    let rt = Arc::new(rt);
    run("7 gateway change detection", &mut || {
        rt.block_on(criterion_7())
    });
    run("8 end-to-end latency", &mut || rt.block_on(criterion_8()));
    run("9 robustness", &mut || rt.block_on(criterion_9()));

    let failed: Vec<_> = results
        .iter()
        .filter(|(_, v)| !v.pass)
        .map(|(n, _)| *n)
        .collect();
    println!(
        "acceptance: {} passed, {} failed",
        results.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
