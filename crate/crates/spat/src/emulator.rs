//! Traffic controller emulator: replays a [`CycleSpec`] as SPaT datagrams
//! at a fixed rate.

use std::io::{self, Write};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use tokio::net::UdpSocket;
use tokio::sync::watch;

use crate::codec::{encode_spat_packet, IntersectionState};
use crate::cycle::CycleSpec;

pub const DEFAULT_RATE_HZ: f64 = 10.0;

/// One state transition as sent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub packet_index: u64,
    pub state: IntersectionState,
    /// Wall-clock send time, microseconds since the Unix epoch.
    pub sent_unix_us: i64,
    /// Send time relative to the first packet, microseconds.
    #[serde(default)]
    pub offset_us: u64,
}

/// Transitions shared between the emulator and in-process observers.
#[derive(Debug, Clone, Default)]
pub struct TransitionLog(Arc<Mutex<Vec<Transition>>>);

impl TransitionLog {
    pub fn push(&self, t: Transition) {
        self.0.lock().unwrap().push(t);
    }

    pub fn snapshot(&self) -> Vec<Transition> {
        self.0.lock().unwrap().clone()
    }
}

/// Parses a line-delimited JSON transition log; unreadable lines are
/// skipped.
pub fn read_transition_log(text: &str) -> Vec<Transition> {
    text.lines()
        .filter_map(|l| serde_json::from_str(l).ok())
        .collect()
}

pub fn unix_us(t: SystemTime) -> i64 {
    t.duration_since(UNIX_EPOCH)
        .map(|d| d.as_micros() as i64)
        .unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct EmulatorConfig {
    pub target: SocketAddr,
    pub cycle: CycleSpec,
    pub rate_hz: f64,
    pub pedestrian: bool,
    /// Stop after this long; `None` runs until the stop signal.
    pub duration: Option<Duration>,
}

impl EmulatorConfig {
    pub fn new(target: SocketAddr) -> Self {
        Self {
            target,
            cycle: CycleSpec::default(),
            rate_hz: DEFAULT_RATE_HZ,
            pedestrian: false,
            duration: None,
        }
    }

    fn period(&self) -> Duration {
        Duration::from_secs_f64(1.0 / self.rate_hz)
    }

    /// Cycle state for the `k`-th packet.
    pub fn state_for_packet(&self, k: u64) -> IntersectionState {
        let elapsed_ds = (k as f64 * 10.0 / self.rate_hz).floor() as u64;
        self.cycle.state_at(elapsed_ds)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmulatorReport {
    pub packets_sent: u64,
    pub send_errors: u64,
    pub transitions: Vec<Transition>,
}

/// Sends one datagram per tick on an absolute schedule, so the count over a
/// run of `d` seconds is `d * rate_hz` regardless of scheduling delays.
/// Send failures are logged and the next tick retries.
pub async fn emulate_controller(
    cfg: &EmulatorConfig,
    log: &TransitionLog,
    mut transition_sink: Option<&mut (dyn Write + Send)>,
    mut stop: watch::Receiver<bool>,
) -> io::Result<EmulatorReport> {
    if !(cfg.rate_hz > 0.0 && cfg.rate_hz.is_finite()) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "rate must be positive",
        ));
    }
    let bind: SocketAddr = if cfg.target.is_ipv4() {
        "0.0.0.0:0".parse().unwrap()
    } else {
        "[::]:0".parse().unwrap()
    };
    let socket = UdpSocket::bind(bind).await?;
    let period = cfg.period();
    let start = tokio::time::Instant::now();
    let mut previous: Option<IntersectionState> = None;
    let mut report = EmulatorReport {
        packets_sent: 0,
        send_errors: 0,
        transitions: Vec::new(),
    };

    for k in 0u64.. {
        let offset = period.mul_f64(k as f64);
        if cfg.duration.is_some_and(|d| offset >= d) {
            break;
        }
        tokio::select! {
            _ = tokio::time::sleep_until(start + offset) => {}
            _ = stop.wait_for(|s| *s) => break,
        }
        let state = cfg.state_for_packet(k);
        let packet = encode_spat_packet(&state, cfg.pedestrian);
        let sent_at = SystemTime::now();
        match socket.send_to(&packet, cfg.target).await {
            Ok(_) => report.packets_sent += 1,
            Err(e) => {
                report.send_errors += 1;
                tracing::warn!(target = %cfg.target, error = %e, "send failed, retrying next tick");
                continue;
            }
        }
        if previous != Some(state) {
            let t = Transition {
                packet_index: k,
                state,
                sent_unix_us: unix_us(sent_at),
                offset_us: Instant::now().duration_since(start.into_std()).as_micros() as u64,
            };
            tracing::info!(packet = k, state = %state, offset_us = t.offset_us, "transition");
            if let Some(sink) = transition_sink.as_deref_mut() {
                serde_json::to_writer(&mut *sink, &t)?;
                sink.write_all(b"\n")?;
                sink.flush()?;
            }
            log.push(t.clone());
            report.transitions.push(t);
            previous = Some(state);
        }
    }
    Ok(report)
}
