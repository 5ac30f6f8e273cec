//! HTTP surface: `POST /sync`, `POST /finalize`, `GET /healthz`.

use std::io;
use std::net::SocketAddr;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use slingkube_core::api::webhook::SyncRequest;
use slingkube_core::api::ErrorBody;
use slingkube_core::server::ServerHandle;

use crate::{EndpointError, VniEndpoint};

fn error(status: StatusCode, error: &str, message: String) -> Response {
    let body = ErrorBody {
        error: error.to_owned(),
        message,
    };
    (status, Json(body)).into_response()
}

impl IntoResponse for EndpointError {
    fn into_response(self) -> Response {
        error(StatusCode::INTERNAL_SERVER_ERROR, "Internal", self.to_string())
    }
}

async fn run<T, F>(ep: VniEndpoint, body: Result<Json<SyncRequest>, JsonRejection>, f: F) -> Response
where
    T: serde::Serialize + Send + 'static,
    F: FnOnce(&VniEndpoint, &SyncRequest) -> Result<T, EndpointError> + Send + 'static,
{
    let Json(req) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, "BadRequest", e.body_text()),
    };
    // sqlite calls block; keep them off the async workers
    match tokio::task::spawn_blocking(move || f(&ep, &req)).await {
        Ok(Ok(resp)) => Json(resp).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()),
    }
}

async fn sync(State(ep): State<VniEndpoint>, body: Result<Json<SyncRequest>, JsonRejection>) -> Response {
    run(ep, body, |ep, req| ep.sync(req)).await
}

async fn finalize(
    State(ep): State<VniEndpoint>,
    body: Result<Json<SyncRequest>, JsonRejection>,
) -> Response {
    run(ep, body, |ep, req| ep.finalize(req)).await
}

pub fn router(ep: VniEndpoint) -> Router {
    Router::new()
        .route("/sync", post(sync))
        .route("/finalize", post(finalize))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(ep)
}

pub fn spawn(ep: VniEndpoint, addr: SocketAddr) -> io::Result<ServerHandle> {
    slingkube_core::server::spawn("vni-endpoint", addr, router(ep))
}
