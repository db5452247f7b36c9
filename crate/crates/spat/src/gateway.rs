//! Latest-value store shared between the single UDP ingest writer and any
//! number of HTTP readers.
//!
//! The snapshot lives in a `tokio::sync::watch` channel. Ingest replaces it
//! under the channel's write lock; readers clone it under the read lock, so
//! a reader sees either the old or the new snapshot in full. Receivers are
//! only woken when the intersection state changes. Nothing on this path
//! touches the file system.

use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde::Serialize;
use tokio::sync::watch;

use crate::codec::{interpret_state, parse_spat_packet, IntersectionState, SpatError};

#[derive(Debug, Clone, PartialEq)]
pub struct GatewaySnapshot {
    pub state: IntersectionState,
    /// Incremented by one per state change; 0 is the all-red sentinel.
    pub sequence: u64,
    /// Monotonic receive time of the datagram that produced this state.
    pub ingest_time: Instant,
    pub wall_time: DateTime<Utc>,
    /// Every datagram received, rejected ones included.
    pub packets_seen: u64,
    pub changes_seen: u64,
    pub rejected: u64,
}

/// Body of `GET /spat`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SnapshotDocument {
    pub sequence: u64,
    pub wall_time: DateTime<Utc>,
    pub phases: IntersectionState,
    pub packets_seen: u64,
    pub changes_seen: u64,
}

impl From<&GatewaySnapshot> for SnapshotDocument {
    fn from(s: &GatewaySnapshot) -> Self {
        Self {
            sequence: s.sequence,
            wall_time: s.wall_time,
            phases: s.state,
            packets_seen: s.packets_seen,
            changes_seen: s.changes_seen,
        }
    }
}

/// Body of `GET /health`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct HealthDocument {
    pub sequence: u64,
    pub packets_seen: u64,
    pub changes_seen: u64,
    pub rejected: u64,
    pub uptime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IngestOutcome {
    Changed(GatewaySnapshot),
    Unchanged,
    Rejected(SpatError),
}

#[derive(Debug)]
pub struct SpatGateway {
    tx: watch::Sender<GatewaySnapshot>,
    started: Instant,
}

impl Default for SpatGateway {
    fn default() -> Self {
        Self::new()
    }
}

impl SpatGateway {
    pub fn new() -> Self {
        let started = Instant::now();
        let (tx, _) = watch::channel(GatewaySnapshot {
            state: IntersectionState::ALL_RED,
            sequence: 0,
            ingest_time: started,
            wall_time: Utc::now(),
            packets_seen: 0,
            changes_seen: 0,
            rejected: 0,
        });
        Self { tx, started }
    }

    /// Decodes one datagram and publishes a new snapshot if the derived
    /// state differs from the current one. Must only be called from a
    /// single writer.
    pub fn ingest(&self, bytes: &[u8], recv_time: Instant) -> IngestOutcome {
        let decoded = parse_spat_packet(bytes).and_then(|f| interpret_state(&f));
        let mut outcome = IngestOutcome::Unchanged;
        self.tx.send_if_modified(|snap| {
            snap.packets_seen += 1;
            match &decoded {
                Err(e) => {
                    snap.rejected += 1;
                    outcome = IngestOutcome::Rejected(e.clone());
                    false
                }
                Ok(state) if *state == snap.state => false,
                Ok(state) => {
                    snap.state = *state;
                    snap.sequence += 1;
                    snap.changes_seen += 1;
                    snap.ingest_time = recv_time;
                    snap.wall_time = Utc::now();
                    outcome = IngestOutcome::Changed(snap.clone());
                    true
                }
            }
        });
        if let IngestOutcome::Rejected(e) = &outcome {
            tracing::debug!(len = bytes.len(), error = %e, "dropped datagram");
        }
        outcome
    }

    pub fn current_snapshot(&self) -> GatewaySnapshot {
        self.tx.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<GatewaySnapshot> {
        self.tx.subscribe()
    }

    /// Returns as soon as the sequence exceeds `since`, or the current
    /// snapshot once `timeout` elapses.
    pub async fn wait_for_change(&self, since: u64, timeout: Duration) -> GatewaySnapshot {
        let mut rx = self.subscribe();
        let wait = async {
            let snap = rx.wait_for(|s| s.sequence > since).await.ok()?;
            Some(snap.clone())
        };
        match tokio::time::timeout(timeout, wait).await {
            Ok(Some(snap)) => snap,
            _ => self.current_snapshot(),
        }
    }

    pub fn health(&self) -> HealthDocument {
        let s = self.current_snapshot();
        HealthDocument {
            sequence: s.sequence,
            packets_seen: s.packets_seen,
            changes_seen: s.changes_seen,
            rejected: s.rejected,
            uptime_s: self.started.elapsed().as_secs_f64(),
        }
    }
}
