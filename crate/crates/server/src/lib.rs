//! Long-running HTTP service over the retrieval and pipeline operations.
//!
//! The service holds loaded corpora and indexes in memory across requests;
//! clients name them by session id, index file, or corpus path. One
//! generator backend (HTTP or scripted mock) is configured at startup.

mod error;
mod routes;
mod state;

use std::net::SocketAddr;
use std::sync::Arc;

use thiserror::Error as ThisError;
use thoughtrag_core::config::RunConfig;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use error::ApiError;
pub use state::AppState;

#[derive(Debug, ThisError)]
pub enum Error {
    #[error("failed to build generator backend: {0}")]
    Backend(#[from] thoughtrag_core::llm::LlmError),
    #[error("failed to bind listener: {0}")]
    Bind(#[from] std::io::Error),
}

/// A started service. Dropping it aborts the task; call
/// [`RunningServer::shutdown`] for a graceful stop.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: oneshot::Sender<()>,
    handle: JoinHandle<()>,
}

impl RunningServer {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub async fn shutdown(self) {
        let _ = self.shutdown.send(());
        let _ = self.handle.await;
    }
}

/// Binds `bind_addr` (use port 0 for an ephemeral port) and serves until
/// shutdown.
pub async fn start(config: RunConfig, bind_addr: &str) -> Result<RunningServer, Error> {
    let state = AppState::new(config)?;
    let app = routes::router(state);
    let listener = tokio::net::TcpListener::bind(bind_addr).await?;
    let addr = listener.local_addr()?;

    let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();
    let handle = tokio::spawn(async move {
        let served = axum::serve(listener, app).with_graceful_shutdown(async {
            let _ = shutdown_rx.await;
        });
        if let Err(e) = served.await {
            tracing::error!("server error: {e}");
        }
    });

    Ok(RunningServer {
        addr,
        shutdown: shutdown_tx,
        handle,
    })
}

/// Serves until ctrl-c. Used by the CLI `serve` subcommand.
pub async fn serve_until_interrupted(config: RunConfig, bind_addr: &str) -> Result<(), Error> {
    let server = start(config, bind_addr).await?;
    tracing::info!("listening on {}", server.addr);
    println!("listening on {}", server.base_url());
    tokio::signal::ctrl_c().await?;
    tracing::info!("shutting down");
    server.shutdown().await;
    Ok(())
}

/// Builds the router against existing state, for in-process testing.
pub fn router(state: Arc<AppState>) -> axum::Router {
    routes::router(state)
}
