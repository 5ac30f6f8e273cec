use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};
use slingkube_core::api::webhook::{
    FinalizeResponse, ParentKind, ParentObject, SyncRequest, SyncResponse, VniCrd, VniRequest,
};
use slingkube_core::{Clock, OwnerRef, Timestamp, Vni};
use slingkube_store::{StoreError, VniStore};

/// Failures that are not part of the webhook protocol. Domain problems
/// (missing claim, exhausted pool, bad annotation) go into the response
/// status instead.
#[derive(Debug, thiserror::Error)]
pub enum EndpointError {
    #[error("vni database: {0}")]
    Store(#[from] StoreError),
}

/// Database plus clock; cheap to clone into request handlers.
#[derive(Clone)]
pub struct VniEndpoint {
    pub store: Arc<VniStore>,
    pub clock: Arc<dyn Clock>,
}

impl VniEndpoint {
    pub fn new(store: Arc<VniStore>, clock: Arc<dyn Clock>) -> Self {
        Self { store, clock }
    }

    pub fn sync(&self, req: &SyncRequest) -> Result<SyncResponse, EndpointError> {
        handle_sync(&self.store, req, self.clock.now())
    }

    pub fn finalize(&self, req: &SyncRequest) -> Result<FinalizeResponse, EndpointError> {
        handle_finalize(&self.store, req, self.clock.now())
    }
}

fn owning_crd(parent: &ParentObject, vni: Vni) -> VniCrd {
    VniCrd {
        name: VniCrd::child_name(&parent.metadata.name),
        namespace: parent.metadata.namespace.clone(),
        vni,
        owning: true,
        claim_name: None,
    }
}

fn virtual_crd(parent: &ParentObject, vni: Vni, claim: &str) -> VniCrd {
    VniCrd {
        owning: false,
        claim_name: Some(claim.to_owned()),
        ..owning_crd(parent, vni)
    }
}

fn bound(crd: VniCrd) -> SyncResponse {
    let mut status = BTreeMap::new();
    status.insert("vni".to_owned(), json!(crd.vni));
    status.insert("vniCrd".to_owned(), json!(crd.name));
    SyncResponse {
        children: vec![crd],
        status,
    }
}

fn failed(error: &str, message: String) -> SyncResponse {
    let mut status = BTreeMap::new();
    status.insert("error".to_owned(), Value::from(error));
    status.insert("message".to_owned(), Value::from(message));
    SyncResponse {
        children: Vec::new(),
        status,
    }
}

/// The virtual child a claim-redeeming job already carries, if any. Once a
/// job has been bound it keeps that VNI even if the claim is later replaced.
fn pinned<'a>(req: &'a SyncRequest, claim: &str) -> Option<&'a VniCrd> {
    let name = VniCrd::child_name(&req.parent.metadata.name);
    req.children
        .iter()
        .find(|c| c.name == name && !c.owning && c.claim_name.as_deref() == Some(claim))
}

pub fn handle_sync(
    store: &VniStore,
    req: &SyncRequest,
    now: Timestamp,
) -> Result<SyncResponse, EndpointError> {
    let parent = &req.parent;
    let owner = parent.owner_ref();
    let request = match parent.kind {
        ParentKind::VniClaim => VniRequest::PerResource,
        ParentKind::Job => match VniRequest::from_annotations(&parent.metadata.annotations) {
            Ok(r) => r,
            Err(e) => return Ok(failed("MalformedAnnotation", e.to_string())),
        },
    };
    match request {
        VniRequest::Disabled => Ok(SyncResponse::default()),
        VniRequest::PerResource => match store.acquire(&owner, now) {
            Ok(vni) => Ok(bound(owning_crd(parent, vni))),
            Err(StoreError::PoolExhausted) => {
                Ok(failed("PoolExhausted", format!("no VNI available for {owner}")))
            }
            Err(e) => Err(e.into()),
        },
        VniRequest::Claim(claim) => {
            let user = owner.as_str();
            if let Some(crd) = pinned(req, &claim) {
                match store.add_user(crd.vni, user, now) {
                    Ok(()) | Err(StoreError::NotAllocated(_)) => return Ok(bound(crd.clone())),
                    Err(e) => return Err(e.into()),
                }
            }
            let claim_ref = OwnerRef::claim(&parent.metadata.namespace, &claim);
            let Some(vni) = store.lookup_owner(&claim_ref)? else {
                return Ok(failed(
                    "ClaimNotFound",
                    format!("no VNI claim {claim} in namespace {}", parent.metadata.namespace),
                ));
            };
            match store.add_user(vni, user, now) {
                Ok(()) => Ok(bound(virtual_crd(parent, vni, &claim))),
                // released between lookup and add_user
                Err(StoreError::NotAllocated(_)) => Ok(failed(
                    "ClaimNotFound",
                    format!("VNI claim {claim} was released"),
                )),
                Err(e) => Err(e.into()),
            }
        }
    }
}

fn finalized(done: bool, children: Vec<VniCrd>, status: BTreeMap<String, Value>) -> FinalizeResponse {
    FinalizeResponse {
        children,
        status,
        finalized: done,
    }
}

pub fn handle_finalize(
    store: &VniStore,
    req: &SyncRequest,
    now: Timestamp,
) -> Result<FinalizeResponse, EndpointError> {
    let parent = &req.parent;
    let owner = parent.owner_ref();
    let done = || finalized(true, Vec::new(), BTreeMap::new());

    match parent.kind {
        ParentKind::VniClaim => {
            let Some(vni) = store.lookup_owner(&owner)? else {
                return Ok(done());
            };
            let users = store.record(vni)?.map(|r| r.users).unwrap_or_default();
            if !users.is_empty() {
                return Ok(stalled(req, vni, users.len()));
            }
            match store.release(vni, &owner, now) {
                Ok(()) | Err(StoreError::NotAllocated(_)) | Err(StoreError::NotOwner { .. }) => {
                    Ok(done())
                }
                Err(StoreError::UsersRemain { users, .. }) => Ok(stalled(req, vni, users)),
                Err(e) => Err(e.into()),
            }
        }
        ParentKind::Job => {
            let request = VniRequest::from_annotations(&parent.metadata.annotations)
                .unwrap_or(VniRequest::Disabled);
            match request {
                VniRequest::Disabled => Ok(done()),
                VniRequest::PerResource => {
                    if let Some(vni) = store.lookup_owner(&owner)? {
                        match store.release(vni, &owner, now) {
                            Ok(()) | Err(StoreError::NotAllocated(_)) => {}
                            Err(e) => return Err(e.into()),
                        }
                    }
                    Ok(done())
                }
                VniRequest::Claim(claim) => {
                    let vni = match pinned(req, &claim) {
                        Some(crd) => Some(crd.vni),
                        None => store.lookup_owner(&OwnerRef::claim(&parent.metadata.namespace, &claim))?,
                    };
                    if let Some(vni) = vni {
                        match store.remove_user(vni, owner.as_str(), now) {
                            Ok(_) | Err(StoreError::NotAllocated(_)) => {}
                            Err(e) => return Err(e.into()),
                        }
                    }
                    Ok(done())
                }
            }
        }
    }
}

fn stalled(req: &SyncRequest, vni: Vni, users: usize) -> FinalizeResponse {
    let mut status = BTreeMap::new();
    status.insert("vni".to_owned(), json!(vni));
    status.insert("users".to_owned(), json!(users));
    let children = match req.children.is_empty() {
        true => vec![owning_crd(&req.parent, vni)],
        false => req.children.clone(),
    };
    finalized(false, children, status)
}
