//! Authoritative planning scene server.
//!
//! Clients connect over TCP (length-prefixed JSON frames) or WebSocket (one
//! JSON message per text frame at `/ws`). All scene mutations pass through a
//! single hub task; planning and IK run on worker threads against snapshots.

mod config;
mod executor;
mod hub;
mod transport;

use std::net::SocketAddr;
use std::sync::atomic::AtomicU64;
use std::sync::Arc;

use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;

pub use config::{
    PlannerFn, ServerConfig, ServerError, DEFAULT_OUTBOUND_QUEUE, DEFAULT_PLANNING_WORKERS, DEFAULT_TCP_PORT,
    DEFAULT_WS_PORT,
};
pub use executor::{ExecutionFeedback, ExecutorAdapter, MockExecutor, EXECUTOR_RATE_HZ};

use hub::{Hub, HubEvent};
use transport::{accept_tcp, ws_upgrade, Transport};

const HUB_INBOX: usize = 4096;

/// A running server. Dropping the handle leaves it running; call
/// [`ServerHandle::shutdown`] to stop it.
pub struct ServerHandle {
    tcp_addr: SocketAddr,
    ws_addr: SocketAddr,
    hub: mpsc::Sender<HubEvent>,
    hub_task: JoinHandle<()>,
    tcp_task: JoinHandle<()>,
    http_task: JoinHandle<()>,
    http_stop: oneshot::Sender<()>,
}

impl ServerHandle {
    pub fn tcp_addr(&self) -> SocketAddr {
        self.tcp_addr
    }

    pub fn ws_addr(&self) -> SocketAddr {
        self.ws_addr
    }

    /// Sends every session a shutting-down error, closes them and stops
    /// listening.
    pub async fn shutdown(self) {
        self.tcp_task.abort();
        let (done, wait) = oneshot::channel();
        if self.hub.send(HubEvent::Shutdown { done }).await.is_ok() {
            let _ = wait.await;
        }
        let _ = self.hub_task.await;
        let _ = self.http_stop.send(());
        let _ = tokio::time::timeout(std::time::Duration::from_secs(2), self.http_task).await;
    }
}

/// Binds both listeners and starts serving.
pub async fn start(config: ServerConfig) -> Result<ServerHandle, ServerError> {
    if config.planning_workers == 0 || config.outbound_queue == 0 {
        return Err(ServerError::Config(
            "planning_workers and outbound_queue must be positive".into(),
        ));
    }
    let bind = |addr: SocketAddr| async move {
        TcpListener::bind(addr)
            .await
            .map_err(|source| ServerError::Bind { addr, source })
    };
    let tcp = bind(config.tcp_addr).await?;
    let http = bind(config.ws_addr).await?;
    let tcp_addr = tcp.local_addr().expect("bound socket");
    let ws_addr = http.local_addr().expect("bound socket");

    let (hub_tx, hub_rx) = mpsc::channel(HUB_INBOX);
    let hub = Hub::new(&config, hub_tx.clone());
    let hub_task = tokio::spawn(hub.run(hub_rx));

    let transport = Transport {
        hub: hub_tx.clone(),
        next_session: Arc::new(AtomicU64::new(1)),
        queue_len: config.outbound_queue,
    };
    let tcp_task = tokio::spawn(accept_tcp(tcp, transport.clone()));

    let mut router = Router::new().route("/ws", get(ws_upgrade)).with_state(transport);
    if let Some(dir) = &config.static_dir {
        router = router.fallback_service(ServeDir::new(dir));
    }
    let (http_stop, stopped) = oneshot::channel::<()>();
    let http_task = tokio::spawn(async move {
        let serve = axum::serve(http, router).with_graceful_shutdown(async {
            let _ = stopped.await;
        });
        if let Err(e) = serve.await {
            tracing::error!(%e, "http server failed");
        }
    });

    tracing::info!(%tcp_addr, %ws_addr, "listening");
    Ok(ServerHandle {
        tcp_addr,
        ws_addr,
        hub: hub_tx,
        hub_task,
        tcp_task,
        http_task,
        http_stop,
    })
}
