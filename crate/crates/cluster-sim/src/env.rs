//! A complete stack in one process: VNI store and endpoint, CXI fabric and
//! its control socket, the management API and the cluster.

use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use slingkube_core::server::{self, ServerHandle};
use slingkube_core::VniRange;
use slingkube_cxi::Fabric;
use slingkube_endpoint::VniEndpoint;
use slingkube_store::{QuarantinePolicy, StoreConfig, StoreError, VniState, VniStore};
use tempfile::TempDir;

use crate::cni::{CniRuntime, NoCni, PluginExec, PluginRuntime};
use crate::webhook::{HttpWebhook, InProcessWebhook, Switchable, VniWebhook};
use crate::{api, Cluster, SimClock, SimConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClockMode {
    #[default]
    Virtual,
    Wall,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WebhookMode {
    /// Endpoint served over HTTP on loopback.
    #[default]
    Http,
    InProcess,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CniMode {
    /// Sandboxes come up without the CXI plugin.
    None,
    #[default]
    InProcess,
    Binary(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct EnvConfig {
    pub sim: SimConfig,
    pub clock: ClockMode,
    pub webhook: WebhookMode,
    pub cni: CniMode,
    pub pool_start: u16,
    pub pool_end: u16,
    pub quarantine_seconds: f64,
    /// Store file; in memory when unset.
    pub db: Option<PathBuf>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            sim: SimConfig::default(),
            clock: ClockMode::Virtual,
            webhook: WebhookMode::Http,
            cni: CniMode::InProcess,
            pool_start: 1024,
            pool_end: 65535,
            quarantine_seconds: 30.0,
            db: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("bad pool: {0}")]
    Pool(String),
}

pub struct Environment {
    pub cluster: Arc<Cluster>,
    pub store: Arc<VniStore>,
    pub fabric: Arc<Fabric>,
    pub webhook: Arc<Switchable>,
    pub clock: SimClock,
    mgmt: ServerHandle,
    endpoint: Option<ServerHandle>,
    _cxi: ServerHandle,
    _state: TempDir,
}

fn loopback() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 0))
}

impl Environment {
    pub fn start(cfg: EnvConfig) -> Result<Self, EnvError> {
        let clock = match cfg.clock {
            ClockMode::Virtual => SimClock::virtual_at_zero(),
            ClockMode::Wall => SimClock::wall(),
        };
        let pool = VniRange::new(cfg.pool_start, cfg.pool_end).map_err(|e| EnvError::Pool(e.to_string()))?;
        let store_cfg = StoreConfig {
            pool,
            quarantine: QuarantinePolicy::new(cfg.quarantine_seconds)?,
            ..Default::default()
        };
        let store = Arc::new(match &cfg.db {
            Some(p) => VniStore::open(p, store_cfg)?,
            None => VniStore::in_memory(store_cfg)?,
        });
        let ep = VniEndpoint::new(store.clone(), clock.as_clock());
        let (inner, endpoint): (Arc<dyn VniWebhook>, _) = match cfg.webhook {
            WebhookMode::Http => {
                let h = slingkube_endpoint::server::spawn(ep, loopback())?;
                (Arc::new(HttpWebhook::new(&h.base_url())), Some(h))
            }
            WebhookMode::InProcess => (Arc::new(InProcessWebhook(ep)), None),
        };
        let webhook = Arc::new(Switchable::new(inner));

        let fabric = Arc::new(Fabric::new(cfg.sim.nodes.iter().cloned()));
        let cxi = slingkube_cxi::server::spawn(fabric.clone(), loopback())?;
        let state = tempfile::tempdir()?;

        // the plugin needs the management URL before the cluster exists
        let listener = TcpListener::bind(loopback())?;
        let mgmt_url = format!("http://{}", listener.local_addr()?);
        let cni: Arc<dyn CniRuntime> = match &cfg.cni {
            CniMode::None => Arc::new(NoCni),
            CniMode::InProcess | CniMode::Binary(_) => Arc::new(PluginRuntime {
                mgmt_url,
                cxi_url: cxi.base_url(),
                state_root: state.path().to_owned(),
                exec: match &cfg.cni {
                    CniMode::Binary(p) => PluginExec::Binary(p.clone()),
                    _ => PluginExec::InProcess,
                },
            }),
        };
        let cluster = Cluster::new(cfg.sim.clone(), clock.clone(), webhook.clone(), cni);
        let mgmt = server::spawn_on("mgmt", listener, api::router(cluster.clone()))?;
        Ok(Environment {
            cluster,
            store,
            fabric,
            webhook,
            clock,
            mgmt,
            endpoint,
            _cxi: cxi,
            _state: state,
        })
    }

    pub fn mgmt_url(&self) -> String {
        self.mgmt.base_url()
    }

    pub fn endpoint_url(&self) -> Option<String> {
        self.endpoint.as_ref().map(|h| h.base_url())
    }

    pub fn set_endpoint_up(&self, up: bool) {
        self.webhook.set_up(up);
    }

    pub fn vnis_allocated(&self) -> usize {
        self.store.count_in_state(VniState::Allocated).expect("store readable")
    }

    pub fn vnis_quarantined(&self) -> usize {
        self.store.count_in_state(VniState::Quarantined).expect("store readable")
    }

    pub fn cxi_services(&self) -> usize {
        self.fabric.total_services()
    }
}
