//! Headless watch client: long-polls the gateway and measures latency.
//!
//! Latency of an observed change is its receipt time minus the send time
//! of the matching emulator transition (the latest transition to the same
//! state sent no later than receipt). Without a transition log the
//! gateway's ingest wall time is used instead, which measures the
//! gateway-to-client leg only.

use std::time::{Duration, Instant, SystemTime};

use thiserror::Error;

use crate::codec::IntersectionState;
use crate::emulator::{unix_us, Transition};
use crate::gateway::SnapshotDocument;

#[derive(Debug, Error)]
pub enum WatchError {
    #[error("gateway {url} unreachable: {source}")]
    Unreachable { url: String, source: reqwest::Error },
    #[error("no state changes observed in {0:?}")]
    NoChanges(Duration),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyStats {
    pub samples: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    /// Nearest-rank percentiles. `None` for an empty sample.
    pub fn from_samples(samples_ms: &[f64]) -> Option<Self> {
        if samples_ms.is_empty() {
            return None;
        }
        let mut sorted = samples_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let rank = |p: f64| {
            let idx = (p * sorted.len() as f64).ceil() as usize;
            sorted[idx.clamp(1, sorted.len()) - 1]
        };
        Some(Self {
            samples: sorted.len(),
            median_ms: rank(0.5),
            p95_ms: rank(0.95),
            max_ms: *sorted.last().unwrap(),
        })
    }
}

/// One change as seen by the client.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub sequence: u64,
    pub state: IntersectionState,
    pub received_unix_us: i64,
    pub ingest_unix_us: i64,
}

impl Observation {
    /// Latency against the emulator's log, falling back to ingest time.
    pub fn latency_ms(&self, transitions: &[Transition]) -> f64 {
        let sent = transitions
            .iter()
            .filter(|t| t.state == self.state && t.sent_unix_us <= self.received_unix_us)
            .map(|t| t.sent_unix_us)
            .max()
            .unwrap_or(self.ingest_unix_us);
        (self.received_unix_us - sent) as f64 / 1000.0
    }
}

#[derive(Debug, Clone)]
pub struct WatchClient {
    http: reqwest::Client,
    base: String,
}

impl WatchClient {
    pub fn new(base_url: &str) -> Self {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(30))
            .pool_max_idle_per_host(4)
            .build()
            .expect("client builds");
        Self {
            http,
            base: base_url.trim_end_matches('/').to_owned(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub async fn fetch(&self, since: Option<u64>) -> Result<SnapshotDocument, WatchError> {
        let url = match since {
            Some(k) => format!("{}/spat?since={k}", self.base),
            None => format!("{}/spat", self.base),
        };
        let unreachable = |source| WatchError::Unreachable {
            url: url.clone(),
            source,
        };
        self.http
            .get(&url)
            .send()
            .await
            .and_then(reqwest::Response::error_for_status)
            .map_err(unreachable)?
            .json()
            .await
            .map_err(unreachable)
    }

    /// Long-polls for `duration`, calling `on_change` for each observed
    /// change, and returns the observations in order.
    pub async fn observe(
        &self,
        duration: Duration,
        mut on_change: impl FnMut(&Observation),
    ) -> Result<Vec<Observation>, WatchError> {
        let deadline = Instant::now() + duration;
        let mut since = self.fetch(None).await?.sequence;
        let mut seen = Vec::new();
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                break;
            }
            let doc = match tokio::time::timeout(remaining, self.fetch(Some(since))).await {
                Ok(doc) => doc?,
                Err(_) => break,
            };
            let received_unix_us = unix_us(SystemTime::now());
            if doc.sequence > since {
                let obs = Observation {
                    sequence: doc.sequence,
                    state: doc.phases,
                    received_unix_us,
                    ingest_unix_us: doc.wall_time.timestamp_micros(),
                };
                on_change(&obs);
                seen.push(obs);
                since = doc.sequence;
            }
        }
        Ok(seen)
    }
}

/// Watches for `duration` and reports latency statistics. `transitions`
/// is consulted after the run, so a log still being written by a separate
/// emulator process can be re-read by the caller in `load_transitions`.
pub async fn watch_client(
    base_url: &str,
    duration: Duration,
    mut load_transitions: impl FnMut() -> Vec<Transition>,
    mut on_change: impl FnMut(&Observation, f64),
) -> Result<(LatencyStats, Vec<Observation>), WatchError> {
    let client = WatchClient::new(base_url);
    let observations = client
        .observe(duration, |obs| {
            let live = load_transitions();
            on_change(obs, obs.latency_ms(&live));
        })
        .await?;
    let transitions = load_transitions();
    let latencies: Vec<f64> = observations
        .iter()
        .map(|o| o.latency_ms(&transitions))
        .collect();
    let stats = LatencyStats::from_samples(&latencies).ok_or(WatchError::NoChanges(duration))?;
    Ok((stats, observations))
}
