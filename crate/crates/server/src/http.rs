//! Axum transport for the wire protocol. One POST endpoint speaks the
//! canonical JSON request/response bodies; application-level faults travel
//! in the response body with HTTP 200 so clients key off the `error` field.

use std::sync::Arc;

use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};
use tokio::net::TcpListener;

use lrsha_core::wire::{WireRequest, WireResponse};

use crate::service::CommitmentService;

pub fn router(service: Arc<CommitmentService>) -> Router {
    Router::new()
        .route("/", post(handle))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(service)
}

async fn handle(
    State(service): State<Arc<CommitmentService>>,
    Json(req): Json<WireRequest>,
) -> Json<WireResponse> {
    Json(service.handle(&req))
}

/// Serve until the task is cancelled or the process receives ctrl-c.
pub async fn serve(listener: TcpListener, service: Arc<CommitmentService>) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
