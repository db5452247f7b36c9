//! UDP ingest and the HTTP polling endpoint.
//!
//! Routes:
//!
//! * `GET /spat` returns the current snapshot.
//! * `GET /spat?since=k` returns at once if the sequence is above `k`,
//!   otherwise holds the request until the next change or the long-poll
//!   timeout (5 s by default), then returns the current snapshot.
//! * `GET /health` returns counters.

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Query, State};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use thiserror::Error;
use tokio::net::{TcpListener, UdpSocket};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::gateway::{HealthDocument, IngestOutcome, SnapshotDocument, SpatGateway};

pub const DEFAULT_UDP_PORT: u16 = 5010;
pub const DEFAULT_HTTP_PORT: u16 = 8080;
pub const DEFAULT_LONG_POLL: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("address {0} already in use")]
    PortInUse(SocketAddr),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
}

fn bind_error(addr: SocketAddr, source: io::Error) -> ServeError {
    if source.kind() == io::ErrorKind::AddrInUse {
        ServeError::PortInUse(addr)
    } else {
        ServeError::Bind { addr, source }
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub udp_addr: SocketAddr,
    pub http_addr: SocketAddr,
    pub long_poll_timeout: Duration,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            udp_addr: SocketAddr::from(([0, 0, 0, 0], DEFAULT_UDP_PORT)),
            http_addr: SocketAddr::from(([0, 0, 0, 0], DEFAULT_HTTP_PORT)),
            long_poll_timeout: DEFAULT_LONG_POLL,
        }
    }
}

#[derive(Clone)]
struct AppState {
    gateway: Arc<SpatGateway>,
    long_poll_timeout: Duration,
}

#[derive(Debug, Deserialize)]
struct SpatQuery {
    since: Option<u64>,
}

async fn get_spat(
    State(app): State<AppState>,
    Query(q): Query<SpatQuery>,
) -> Json<SnapshotDocument> {
    let snap = match q.since {
        Some(since) => {
            app.gateway
                .wait_for_change(since, app.long_poll_timeout)
                .await
        }
        None => app.gateway.current_snapshot(),
    };
    Json(SnapshotDocument::from(&snap))
}

async fn get_health(State(app): State<AppState>) -> Json<HealthDocument> {
    Json(app.gateway.health())
}

pub fn router(gateway: Arc<SpatGateway>, long_poll_timeout: Duration) -> Router {
    Router::new()
        .route("/spat", get(get_spat))
        .route("/health", get(get_health))
        .with_state(AppState {
            gateway,
            long_poll_timeout,
        })
}

/// Binds an HTTP listener, mapping `AddrInUse` to [`ServeError::PortInUse`].
pub async fn bind_http(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr)
        .await
        .map_err(|e| bind_error(addr, e))
}

pub async fn bind_udp(addr: SocketAddr) -> Result<UdpSocket, ServeError> {
    UdpSocket::bind(addr).await.map_err(|e| bind_error(addr, e))
}

/// Reads datagrams forever and feeds them to the gateway.
pub async fn run_ingest(socket: UdpSocket, gateway: Arc<SpatGateway>) -> io::Result<()> {
    let mut buf = vec![0u8; 65_536];
    loop {
        let (len, from) = socket.recv_from(&mut buf).await?;
        let recv_time = Instant::now();
        if let IngestOutcome::Changed(snap) = gateway.ingest(&buf[..len], recv_time) {
            tracing::info!(sequence = snap.sequence, state = %snap.state, %from, "state change");
        }
    }
}

/// A running gateway: UDP ingest plus HTTP server.
pub struct GatewayHandle {
    pub gateway: Arc<SpatGateway>,
    pub udp_addr: SocketAddr,
    pub http_addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    ingest: JoinHandle<io::Result<()>>,
    http: JoinHandle<io::Result<()>>,
}

impl GatewayHandle {
    pub fn url(&self) -> String {
        format!("http://{}", self.http_addr)
    }

    /// Stops both tasks.
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.ingest.abort();
        let _ = self.http.await;
    }

    /// Runs until either task exits.
    pub async fn wait(self) -> io::Result<()> {
        tokio::select! {
            r = self.ingest => r.map_err(io::Error::other)?,
            r = self.http => r.map_err(io::Error::other)?,
        }
    }
}

/// Binds both sockets and spawns ingest and HTTP tasks on the current
/// runtime.
pub async fn start_gateway(cfg: &ServerConfig) -> Result<GatewayHandle, ServeError> {
    let udp = bind_udp(cfg.udp_addr).await?;
    let http = bind_http(cfg.http_addr).await?;
    let udp_addr = udp.local_addr().map_err(|e| bind_error(cfg.udp_addr, e))?;
    let http_addr = http
        .local_addr()
        .map_err(|e| bind_error(cfg.http_addr, e))?;
    let gateway = Arc::new(SpatGateway::new());
    let (tx, rx) = oneshot::channel::<()>();

    let ingest = tokio::spawn(run_ingest(udp, gateway.clone()));
    let app = router(gateway.clone(), cfg.long_poll_timeout);
    let http = tokio::spawn(async move {
        axum::serve(http, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    tracing::info!(%udp_addr, %http_addr, "gateway listening");
    Ok(GatewayHandle {
        gateway,
        udp_addr,
        http_addr,
        shutdown: Some(tx),
        ingest,
        http,
    })
}
