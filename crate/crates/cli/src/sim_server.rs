//! HTTP serving mode for the simulator.
//!
//! Exposes the same request/response schema as the HTTP backend, so the
//! detector can be exercised over a real socket and compared against the
//! in-process mode.

use std::net::SocketAddr;
use std::sync::Arc;

use anyhow::{Context, Result};
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};

use recallcheck_core::geo::GeoPoint;
use recallcheck_core::search::SearchContext;
use recallcheck_core::shop::{Catalog, TimeOfDay};
use recallcheck_core::sim::{search, SimConfig, SimIndex};

use crate::backend::{SearchWireEntry, SearchWireRequest, SearchWireResponse};

struct ServerState {
    index: SimIndex,
    config: SimConfig,
}

async fn handle_search(
    State(state): State<Arc<ServerState>>,
    Json(req): Json<SearchWireRequest>,
) -> Result<Json<SearchWireResponse>, (StatusCode, String)> {
    let minute = TimeOfDay::parse(&req.timestamp)
        .ok_or_else(|| (StatusCode::BAD_REQUEST, format!("bad timestamp `{}`", req.timestamp)))?
        .minutes;
    if req.page_size == 0 {
        return Err((StatusCode::BAD_REQUEST, "page_size must be positive".into()));
    }
    let ctx = SearchContext {
        account_id: req.account_id,
        location: GeoPoint::new(req.lon, req.lat),
        minute_of_day: minute,
        page_size: req.page_size,
        page_depth: 1,
    };
    let page = search(&req.query, &ctx, &state.index, &state.config);
    Ok(Json(SearchWireResponse {
        entries: page
            .entries
            .into_iter()
            .map(|e| SearchWireEntry { id: e.shop_id, name: e.name, score: e.score })
            .collect(),
        query: page.query,
    }))
}

fn router(catalog: &Catalog, config: SimConfig) -> Result<Router> {
    let index = SimIndex::build(catalog, &config)
        .map_err(|e| anyhow::anyhow!("simulator setup failed: {e}"))?;
    let state = Arc::new(ServerState { index, config });
    Ok(Router::new().route("/search", post(handle_search)).with_state(state))
}

/// A running simulator server bound to a local port; dropping the handle
/// after `shutdown` stops it.
pub struct RunningServer {
    pub addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<()>,
}

impl RunningServer {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.task.await;
    }
}

/// Spawns the server on the current tokio runtime; `port` 0 picks a free
/// port. Used both by tests and by the blocking CLI entry point.
pub async fn spawn(catalog: &Catalog, config: SimConfig, port: u16) -> Result<RunningServer> {
    let app = router(catalog, config)?;
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
        .await
        .with_context(|| format!("binding port {port}"))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let _ = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
    });
    Ok(RunningServer { addr, shutdown: Some(tx), task })
}

/// Blocking entry point for the `sim-serve` subcommand: serves until
/// interrupted (SIGINT/SIGTERM), then shuts down cleanly.
pub fn serve_blocking(catalog: &Catalog, config: SimConfig, port: u16) -> Result<()> {
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    runtime.block_on(async {
        let server = spawn(catalog, config, port).await?;
        eprintln!("simulator listening on http://{}", server.addr);
        wait_for_interrupt().await;
        server.shutdown().await;
        Ok(())
    })
}

async fn wait_for_interrupt() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        let mut term = signal(SignalKind::terminate()).expect("install SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}
