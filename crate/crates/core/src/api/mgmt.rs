//! Read-only cluster management API: `GET /api/pods/{uid}`,
//! `GET /api/jobs/{ns}/{name}`, `GET /api/vnicrds?owner=...`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::webhook::VniCrd;
use crate::{NodeId, OwnerRef, Vni};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Pending,
    Running,
    Succeeded,
    Terminating,
    Deleted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRef {
    pub namespace: String,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PodView {
    pub uid: String,
    pub namespace: String,
    pub name: String,
    pub phase: Phase,
    pub node: Option<NodeId>,
    pub netns_inode: Option<u64>,
    pub container_id: Option<String>,
    pub grace_period_seconds: f64,
    pub job: ObjectRef,
    /// Annotations of the owning job.
    pub annotations: BTreeMap<String, String>,
    /// VNI bound to the owning job through its VniCrd, if any.
    pub vni: Option<Vni>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JobView {
    pub uid: String,
    pub namespace: String,
    pub name: String,
    pub phase: Phase,
    pub annotations: BTreeMap<String, String>,
    pub pods: Vec<String>,
    pub vni_crd: Option<VniCrd>,
    pub status: BTreeMap<String, Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VniCrdView {
    pub owner: OwnerRef,
    #[serde(flatten)]
    pub crd: VniCrd,
}
