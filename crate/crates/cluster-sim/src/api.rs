//! Management API read by the CNI plugin.

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::get;
use axum::{Json, Router};
use slingkube_core::api::mgmt::{JobView, PodView, VniCrdView};

use crate::Cluster;

pub fn router(cluster: Arc<Cluster>) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/api/pods/{uid}", get(pod))
        .route("/api/jobs/{namespace}/{name}", get(job))
        .route("/api/vnicrds", get(vni_crds))
        .with_state(cluster)
}

async fn pod(State(c): State<Arc<Cluster>>, Path(uid): Path<String>) -> Result<Json<PodView>, StatusCode> {
    c.pod_view(&uid).map(Json).ok_or(StatusCode::NOT_FOUND)
}

async fn job(
    State(c): State<Arc<Cluster>>,
    Path((namespace, name)): Path<(String, String)>,
) -> Result<Json<JobView>, StatusCode> {
    c.job_view(&namespace, &name).map(Json).ok_or(StatusCode::NOT_FOUND)
}

async fn vni_crds(
    State(c): State<Arc<Cluster>>,
    Query(q): Query<HashMap<String, String>>,
) -> Json<Vec<VniCrdView>> {
    Json(c.vni_crds(q.get("owner").map(String::as_str)))
}
