//! HTTP+JSON management socket for the CNI plugin.
//!
//! ```text
//! POST   /nodes/{node}/services        {"member":{"kind":"netns","value":N},"vnis":[..],"max_endpoints":M}
//! DELETE /nodes/{node}/services/{id}
//! GET    /nodes/{node}/services
//! ```

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get};
use axum::{Json, Router};
use slingkube_core::api::cxi::{CreateServiceRequest, CreateServiceResponse, ServiceView};
use slingkube_core::api::ErrorBody;
use slingkube_core::server::{self, ServerHandle};
use slingkube_core::NodeId;

use crate::{CxiError, Fabric, ServiceId};

impl IntoResponse for CxiError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            CxiError::EmptyVniSet => (StatusCode::UNPROCESSABLE_ENTITY, "EmptyVniSet"),
            CxiError::UnknownNode(_) => (StatusCode::NOT_FOUND, "UnknownNode"),
            CxiError::UnknownService { .. } => (StatusCode::NOT_FOUND, "UnknownService"),
            CxiError::PermissionDenied { .. } => (StatusCode::FORBIDDEN, "PermissionDenied"),
            CxiError::EndpointQuotaExceeded { .. } => {
                (StatusCode::TOO_MANY_REQUESTS, "EndpointQuotaExceeded")
            }
            CxiError::UnknownEndpoint { .. } => (StatusCode::NOT_FOUND, "UnknownEndpoint"),
            CxiError::InvalidNetns => (StatusCode::BAD_REQUEST, "InvalidNetns"),
        };
        (status, Json(ErrorBody::new(code, self.to_string()))).into_response()
    }
}

async fn create(
    State(fabric): State<Arc<Fabric>>,
    Path(node): Path<String>,
    Json(req): Json<CreateServiceRequest>,
) -> Result<(StatusCode, Json<CreateServiceResponse>), CxiError> {
    let id = fabric.create_service(&NodeId(node), req.member, req.vnis, req.max_endpoints)?;
    Ok((StatusCode::CREATED, Json(CreateServiceResponse { id })))
}

async fn remove(
    State(fabric): State<Arc<Fabric>>,
    Path((node, id)): Path<(String, ServiceId)>,
) -> Result<StatusCode, CxiError> {
    fabric.delete_service(&NodeId(node), id)?;
    Ok(StatusCode::NO_CONTENT)
}

async fn list(
    State(fabric): State<Arc<Fabric>>,
    Path(node): Path<String>,
) -> Result<Json<Vec<ServiceView>>, CxiError> {
    let services = fabric.list_services(&NodeId(node))?;
    Ok(Json(services.iter().map(|s| s.view()).collect()))
}

pub fn router(fabric: Arc<Fabric>) -> Router {
    Router::new()
        .route("/nodes/{node}/services", get(list).post(create))
        .route("/nodes/{node}/services/{id}", delete(remove))
        .route("/healthz", get(|| async { "ok" }))
        .with_state(fabric)
}

pub fn spawn(fabric: Arc<Fabric>, addr: SocketAddr) -> io::Result<ServerHandle> {
    server::spawn("cxi-sim", addr, router(fabric))
}
