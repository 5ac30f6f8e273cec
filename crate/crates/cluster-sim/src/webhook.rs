//! How the controller reaches the VNI endpoint.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use slingkube_core::api::webhook::{FinalizeResponse, SyncRequest, SyncResponse};
use slingkube_endpoint::VniEndpoint;

pub trait VniWebhook: Send + Sync {
    fn sync(&self, req: &SyncRequest) -> Result<SyncResponse, String>;
    fn finalize(&self, req: &SyncRequest) -> Result<FinalizeResponse, String>;
}

/// POSTs to a running endpoint.
pub struct HttpWebhook {
    base: String,
    agent: ureq::Agent,
}

impl HttpWebhook {
    pub fn new(base: &str) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(10)))
            .build()
            .into();
        Self {
            base: base.trim_end_matches('/').to_owned(),
            agent,
        }
    }

    fn post<T: serde::de::DeserializeOwned>(&self, path: &str, req: &SyncRequest) -> Result<T, String> {
        self.agent
            .post(format!("{}/{path}", self.base))
            .send_json(req)
            .map_err(|e| e.to_string())?
            .body_mut()
            .read_json()
            .map_err(|e| e.to_string())
    }
}

impl VniWebhook for HttpWebhook {
    fn sync(&self, req: &SyncRequest) -> Result<SyncResponse, String> {
        self.post("sync", req)
    }

    fn finalize(&self, req: &SyncRequest) -> Result<FinalizeResponse, String> {
        self.post("finalize", req)
    }
}

/// Calls the handlers directly.
pub struct InProcessWebhook(pub VniEndpoint);

impl VniWebhook for InProcessWebhook {
    fn sync(&self, req: &SyncRequest) -> Result<SyncResponse, String> {
        self.0.sync(req).map_err(|e| e.to_string())
    }

    fn finalize(&self, req: &SyncRequest) -> Result<FinalizeResponse, String> {
        self.0.finalize(req).map_err(|e| e.to_string())
    }
}

/// Wraps another webhook and can take it offline.
pub struct Switchable {
    inner: Arc<dyn VniWebhook>,
    up: AtomicBool,
}

impl Switchable {
    pub fn new(inner: Arc<dyn VniWebhook>) -> Self {
        Self {
            inner,
            up: AtomicBool::new(true),
        }
    }

    pub fn set_up(&self, up: bool) {
        self.up.store(up, Ordering::SeqCst);
    }

    pub fn is_up(&self) -> bool {
        self.up.load(Ordering::SeqCst)
    }

    fn check(&self) -> Result<(), String> {
        match self.is_up() {
            true => Ok(()),
            false => Err("vni endpoint unavailable".into()),
        }
    }
}

impl VniWebhook for Switchable {
    fn sync(&self, req: &SyncRequest) -> Result<SyncResponse, String> {
        self.check()?;
        self.inner.sync(req)
    }

    fn finalize(&self, req: &SyncRequest) -> Result<FinalizeResponse, String> {
        self.check()?;
        self.inner.finalize(req)
    }
}
