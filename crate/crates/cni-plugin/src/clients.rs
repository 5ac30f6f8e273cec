use std::time::Duration;

use slingkube_core::api::cxi::{CreateServiceRequest, CreateServiceResponse};
use slingkube_core::api::mgmt::{PodView, VniCrdView};
use slingkube_core::OwnerRef;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RemoteError {
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("bad response: {0}")]
    Decode(String),
}

/// Read side of the cluster management plane.
pub trait ManagementApi {
    fn pod(&self, uid: &str) -> Result<Option<PodView>, RemoteError>;
    fn vni_crds(&self, owner: &OwnerRef) -> Result<Vec<VniCrdView>, RemoteError>;
}

/// One node's CXI management socket.
pub trait CxiControl {
    fn create_service(&self, req: &CreateServiceRequest) -> Result<u64, RemoteError>;
    /// Ok(false) when the service did not exist.
    fn delete_service(&self, id: u64) -> Result<bool, RemoteError>;
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(5)))
        .http_status_as_error(false)
        .build()
        .into()
}

fn classify(e: ureq::Error) -> RemoteError {
    match e {
        ureq::Error::Json(e) => RemoteError::Decode(e.to_string()),
        other => RemoteError::Unreachable(other.to_string()),
    }
}

fn status_error(mut resp: ureq::http::Response<ureq::Body>) -> RemoteError {
    RemoteError::Status {
        status: resp.status().as_u16(),
        body: resp.body_mut().read_to_string().unwrap_or_default(),
    }
}

pub struct HttpManagement {
    base: String,
    agent: ureq::Agent,
}

impl HttpManagement {
    pub fn new(base: &str) -> Self {
        Self {
            base: base.trim_end_matches('/').to_owned(),
            agent: agent(),
        }
    }
}

impl ManagementApi for HttpManagement {
    fn pod(&self, uid: &str) -> Result<Option<PodView>, RemoteError> {
        let mut resp = self
            .agent
            .get(format!("{}/api/pods/{uid}", self.base))
            .call()
            .map_err(classify)?;
        match resp.status().as_u16() {
            200 => resp.body_mut().read_json().map(Some).map_err(classify),
            404 => Ok(None),
            _ => Err(status_error(resp)),
        }
    }

    fn vni_crds(&self, owner: &OwnerRef) -> Result<Vec<VniCrdView>, RemoteError> {
        let mut resp = self
            .agent
            .get(format!("{}/api/vnicrds", self.base))
            .query("owner", owner.as_str())
            .call()
            .map_err(classify)?;
        match resp.status().as_u16() {
            200 => resp.body_mut().read_json().map_err(classify),
            _ => Err(status_error(resp)),
        }
    }
}

pub struct HttpCxi {
    socket: String,
    agent: ureq::Agent,
}

impl HttpCxi {
    pub fn new(socket: &str) -> Self {
        Self {
            socket: socket.trim_end_matches('/').to_owned(),
            agent: agent(),
        }
    }
}

impl CxiControl for HttpCxi {
    fn create_service(&self, req: &CreateServiceRequest) -> Result<u64, RemoteError> {
        let mut resp = self
            .agent
            .post(format!("{}/services", self.socket))
            .send_json(req)
            .map_err(classify)?;
        match resp.status().as_u16() {
            200 | 201 => resp
                .body_mut()
                .read_json::<CreateServiceResponse>()
                .map(|r| r.id)
                .map_err(classify),
            _ => Err(status_error(resp)),
        }
    }

    fn delete_service(&self, id: u64) -> Result<bool, RemoteError> {
        let resp = self
            .agent
            .delete(format!("{}/services/{id}", self.socket))
            .call()
            .map_err(classify)?;
        match resp.status().as_u16() {
            200 | 204 => Ok(true),
            404 => Ok(false),
            _ => Err(status_error(resp)),
        }
    }
}
