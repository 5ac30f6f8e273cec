use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::{Mutex, MutexGuard};

use slingkube_core::api::cxi::ServiceView;
use slingkube_core::{MemberKind, MemberSpec, NodeId, Vni};

use crate::CxiError;

pub type ServiceId = u64;

/// Credentials the driver reads from the process requesting an endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProcessContext {
    pub uid: u64,
    pub gid: u64,
    netns_inode: u64,
}

impl ProcessContext {
    pub fn new(uid: u64, gid: u64, netns_inode: u64) -> Result<Self, CxiError> {
        if netns_inode == 0 {
            return Err(CxiError::InvalidNetns);
        }
        Ok(Self {
            uid,
            gid,
            netns_inode,
        })
    }

    pub fn netns_inode(&self) -> u64 {
        self.netns_inode
    }

    fn matches(&self, member: &MemberSpec) -> bool {
        let credential = match member.kind() {
            MemberKind::Uid => self.uid,
            MemberKind::Gid => self.gid,
            MemberKind::Netns => self.netns_inode,
        };
        credential == member.value()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CxiService {
    pub id: ServiceId,
    pub node: NodeId,
    pub member: MemberSpec,
    pub vnis: BTreeSet<Vni>,
    pub max_endpoints: Option<u64>,
    pub active_endpoints: u64,
}

impl CxiService {
    fn has_capacity(&self) -> bool {
        self.max_endpoints
            .is_none_or(|max| self.active_endpoints < max)
    }

    pub fn view(&self) -> ServiceView {
        ServiceView {
            id: self.id,
            node: self.node.clone(),
            member: self.member,
            vnis: self.vnis.iter().copied().collect(),
            max_endpoints: self.max_endpoints,
            active_endpoints: self.active_endpoints,
        }
    }
}

/// Handle returned from a successful endpoint allocation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EndpointHandle {
    pub node: NodeId,
    pub endpoint_id: u64,
    pub vni: Vni,
    pub service_id: ServiceId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    VniMismatch,
    NoService,
    DeadEndpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delivery {
    Delivered,
    Dropped(DropReason),
}

#[derive(Debug)]
struct Endpoint {
    vni: Vni,
    service_id: ServiceId,
    rx: VecDeque<Vec<u8>>,
}

#[derive(Debug, Default)]
struct NodeState {
    next_service: ServiceId,
    next_endpoint: u64,
    services: BTreeMap<ServiceId, CxiService>,
    endpoints: BTreeMap<u64, Endpoint>,
}

impl NodeState {
    fn live_endpoint(&self, h: &EndpointHandle) -> Option<&Endpoint> {
        self.endpoints
            .get(&h.endpoint_id)
            .filter(|ep| ep.vni == h.vni && ep.service_id == h.service_id)
    }
}

/// All simulated NICs plus the switch between them.
///
/// Registry operations are linearizable per node. `transmit` locks both
/// involved nodes in name order, so it sees one consistent snapshot.
#[derive(Debug)]
pub struct Fabric {
    nodes: BTreeMap<NodeId, Mutex<NodeState>>,
}

impl Fabric {
    pub fn new<I, N>(nodes: I) -> Self
    where
        I: IntoIterator<Item = N>,
        N: Into<NodeId>,
    {
        let nodes = nodes
            .into_iter()
            .map(|n| {
                (
                    n.into(),
                    Mutex::new(NodeState {
                        next_service: 1,
                        next_endpoint: 1,
                        ..Default::default()
                    }),
                )
            })
            .collect();
        Self { nodes }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    fn node(&self, node: &NodeId) -> Result<MutexGuard<'_, NodeState>, CxiError> {
        self.nodes
            .get(node)
            .map(|m| m.lock().unwrap())
            .ok_or_else(|| CxiError::UnknownNode(node.clone()))
    }

    pub fn create_service(
        &self,
        node: &NodeId,
        member: MemberSpec,
        vnis: impl IntoIterator<Item = Vni>,
        max_endpoints: Option<u64>,
    ) -> Result<ServiceId, CxiError> {
        let vnis: BTreeSet<Vni> = vnis.into_iter().collect();
        let mut state = self.node(node)?;
        if vnis.is_empty() {
            return Err(CxiError::EmptyVniSet);
        }
        let id = state.next_service;
        state.next_service += 1;
        state.services.insert(
            id,
            CxiService {
                id,
                node: node.clone(),
                member,
                vnis,
                max_endpoints,
                active_endpoints: 0,
            },
        );
        Ok(id)
    }

    pub fn delete_service(&self, node: &NodeId, id: ServiceId) -> Result<(), CxiError> {
        let mut state = self.node(node)?;
        state
            .services
            .remove(&id)
            .map(|_| ())
            .ok_or_else(|| CxiError::UnknownService {
                node: node.clone(),
                id,
            })
    }

    pub fn list_services(&self, node: &NodeId) -> Result<Vec<CxiService>, CxiError> {
        Ok(self.node(node)?.services.values().cloned().collect())
    }

    /// Authenticates `ctx` against the node's registry and, on success,
    /// allocates an endpoint bound to `vni`.
    ///
    /// The first service (by id) whose member matches the context field of
    /// the same kind and whose VNI set contains `vni` authorizes the endpoint.
    pub fn alloc_endpoint(
        &self,
        node: &NodeId,
        ctx: &ProcessContext,
        vni: Vni,
    ) -> Result<EndpointHandle, CxiError> {
        let mut state = self.node(node)?;
        let mut saw_full = false;
        let mut chosen = None;
        for svc in state.services.values() {
            if svc.vnis.contains(&vni) && ctx.matches(&svc.member) {
                if svc.has_capacity() {
                    chosen = Some(svc.id);
                    break;
                }
                saw_full = true;
            }
        }
        let Some(service_id) = chosen else {
            return Err(if saw_full {
                CxiError::EndpointQuotaExceeded { node: node.clone() }
            } else {
                CxiError::PermissionDenied {
                    node: node.clone(),
                    vni,
                }
            });
        };
        state
            .services
            .get_mut(&service_id)
            .expect("chosen service exists")
            .active_endpoints += 1;
        let endpoint_id = state.next_endpoint;
        state.next_endpoint += 1;
        state.endpoints.insert(
            endpoint_id,
            Endpoint {
                vni,
                service_id,
                rx: VecDeque::new(),
            },
        );
        Ok(EndpointHandle {
            node: node.clone(),
            endpoint_id,
            vni,
            service_id,
        })
    }

    pub fn free_endpoint(&self, handle: &EndpointHandle) -> Result<(), CxiError> {
        let mut state = self.node(&handle.node)?;
        if state.live_endpoint(handle).is_none() {
            return Err(CxiError::UnknownEndpoint {
                node: handle.node.clone(),
                endpoint: handle.endpoint_id,
            });
        }
        state.endpoints.remove(&handle.endpoint_id);
        if let Some(svc) = state.services.get_mut(&handle.service_id) {
            svc.active_endpoints = svc.active_endpoints.saturating_sub(1);
        }
        Ok(())
    }

    /// Sends `payload` from `src` to `dst`. Delivery requires both endpoints
    /// to be live, both authorizing services to still exist, and equal VNIs.
    pub fn transmit(&self, src: &EndpointHandle, dst: &EndpointHandle, payload: &[u8]) -> Delivery {
        let (Some(src_node), Some(dst_node)) = (self.nodes.get(&src.node), self.nodes.get(&dst.node))
        else {
            return Delivery::Dropped(DropReason::DeadEndpoint);
        };
        if src.node == dst.node {
            let mut state = src_node.lock().unwrap();
            Self::deliver(&mut state, None, src, dst, payload)
        } else if src.node < dst.node {
            let src_state = src_node.lock().unwrap();
            let mut dst_state = dst_node.lock().unwrap();
            Self::deliver(&mut dst_state, Some(&src_state), src, dst, payload)
        } else {
            let mut dst_state = dst_node.lock().unwrap();
            let src_state = src_node.lock().unwrap();
            Self::deliver(&mut dst_state, Some(&src_state), src, dst, payload)
        }
    }

    // `src_state` is None when both endpoints live on the same node.
    fn deliver(
        dst_state: &mut NodeState,
        src_state: Option<&NodeState>,
        src: &EndpointHandle,
        dst: &EndpointHandle,
        payload: &[u8],
    ) -> Delivery {
        let src_state_ref = src_state.unwrap_or(&*dst_state);
        let src_live = src_state_ref.live_endpoint(src).is_some();
        let src_service = src_state_ref.services.contains_key(&src.service_id);
        if !src_live || dst_state.live_endpoint(dst).is_none() {
            return Delivery::Dropped(DropReason::DeadEndpoint);
        }
        if !src_service || !dst_state.services.contains_key(&dst.service_id) {
            return Delivery::Dropped(DropReason::NoService);
        }
        if src.vni != dst.vni {
            return Delivery::Dropped(DropReason::VniMismatch);
        }
        dst_state
            .endpoints
            .get_mut(&dst.endpoint_id)
            .expect("checked live")
            .rx
            .push_back(payload.to_vec());
        Delivery::Delivered
    }

    /// Drains everything queued for `handle`.
    pub fn recv(&self, handle: &EndpointHandle) -> Result<Vec<Vec<u8>>, CxiError> {
        let mut state = self.node(&handle.node)?;
        if state.live_endpoint(handle).is_none() {
            return Err(CxiError::UnknownEndpoint {
                node: handle.node.clone(),
                endpoint: handle.endpoint_id,
            });
        }
        let ep = state.endpoints.get_mut(&handle.endpoint_id).unwrap();
        Ok(ep.rx.drain(..).collect())
    }

    pub fn total_services(&self) -> usize {
        self.nodes
            .values()
            .map(|n| n.lock().unwrap().services.len())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n0() -> NodeId {
        NodeId::from("n0")
    }

    fn ctx(uid: u64, gid: u64, netns: u64) -> ProcessContext {
        ProcessContext::new(uid, gid, netns).unwrap()
    }

    #[test]
    fn first_service_gets_id_one() {
        let f = Fabric::new(["n0"]);
        let id = f
            .create_service(&n0(), MemberSpec::netns(4026531840), [Vni(1024)], None)
            .unwrap();
        assert_eq!(id, 1);
    }

    #[test]
    fn empty_vni_set_rejected() {
        let f = Fabric::new(["n0"]);
        assert_eq!(
            f.create_service(&n0(), MemberSpec::uid(1000), [], None),
            Err(CxiError::EmptyVniSet)
        );
    }

    #[test]
    fn unknown_node_and_service() {
        let f = Fabric::new(["n0"]);
        let n9 = NodeId::from("n9");
        assert_eq!(
            f.create_service(&n9, MemberSpec::uid(1), [Vni(1)], None),
            Err(CxiError::UnknownNode(n9.clone()))
        );
        assert!(matches!(f.list_services(&n9), Err(CxiError::UnknownNode(_))));
        assert!(matches!(
            f.delete_service(&n0(), 99),
            Err(CxiError::UnknownService { id: 99, .. })
        ));
    }

    #[test]
    fn service_ids_are_never_reused() {
        let f = Fabric::new(["n0"]);
        let a = f.create_service(&n0(), MemberSpec::uid(1), [Vni(5)], None).unwrap();
        f.delete_service(&n0(), a).unwrap();
        let b = f.create_service(&n0(), MemberSpec::uid(1), [Vni(5)], None).unwrap();
        assert!(b > a);
        assert!(f.list_services(&n0()).unwrap().iter().all(|s| s.id != a));
    }

    #[test]
    fn three_creates_one_delete_leaves_two() {
        let f = Fabric::new(["n0"]);
        let ids: Vec<_> = (0..3)
            .map(|i| f.create_service(&n0(), MemberSpec::uid(i), [Vni(7)], None).unwrap())
            .collect();
        f.delete_service(&n0(), ids[1]).unwrap();
        assert_eq!(f.list_services(&n0()).unwrap().len(), 2);
    }

    #[test]
    fn netns_member_authenticates_by_inode() {
        let f = Fabric::new(["n0"]);
        f.create_service(&n0(), MemberSpec::netns(500), [Vni(2000)], None).unwrap();
        let h = f.alloc_endpoint(&n0(), &ctx(0, 0, 500), Vni(2000)).unwrap();
        assert_eq!(h.vni, Vni(2000));
        assert!(matches!(
            f.alloc_endpoint(&n0(), &ctx(0, 0, 501), Vni(2000)),
            Err(CxiError::PermissionDenied { .. })
        ));
    }

    #[test]
    fn quota_is_enforced_and_released() {
        let f = Fabric::new(["n0"]);
        f.create_service(&n0(), MemberSpec::netns(9), [Vni(3000)], Some(1)).unwrap();
        let h = f.alloc_endpoint(&n0(), &ctx(0, 0, 9), Vni(3000)).unwrap();
        assert!(matches!(
            f.alloc_endpoint(&n0(), &ctx(0, 0, 9), Vni(3000)),
            Err(CxiError::EndpointQuotaExceeded { .. })
        ));
        f.free_endpoint(&h).unwrap();
        assert!(f.alloc_endpoint(&n0(), &ctx(0, 0, 9), Vni(3000)).is_ok());
    }

    #[test]
    fn zero_inode_context_is_invalid() {
        assert_eq!(ProcessContext::new(0, 0, 0), Err(CxiError::InvalidNetns));
    }

    #[test]
    fn transmit_after_service_delete_is_dropped() {
        let f = Fabric::new(["n0"]);
        let s = f.create_service(&n0(), MemberSpec::netns(11), [Vni(2000)], None).unwrap();
        let a = f.alloc_endpoint(&n0(), &ctx(0, 0, 11), Vni(2000)).unwrap();
        let b = f.alloc_endpoint(&n0(), &ctx(0, 0, 11), Vni(2000)).unwrap();
        assert_eq!(f.transmit(&a, &b, b"hi"), Delivery::Delivered);
        assert_eq!(f.recv(&b).unwrap(), vec![b"hi".to_vec()]);
        f.delete_service(&n0(), s).unwrap();
        assert_eq!(f.transmit(&a, &b, b"hi"), Delivery::Dropped(DropReason::NoService));
        assert!(matches!(
            f.alloc_endpoint(&n0(), &ctx(0, 0, 11), Vni(2000)),
            Err(CxiError::PermissionDenied { .. })
        ));
    }

    #[test]
    fn freed_or_forged_handles_are_dead() {
        let f = Fabric::new(["n0", "n1"]);
        f.create_service(&n0(), MemberSpec::uid(1), [Vni(2000)], None).unwrap();
        let a = f.alloc_endpoint(&n0(), &ctx(1, 0, 1), Vni(2000)).unwrap();
        let b = f.alloc_endpoint(&n0(), &ctx(1, 0, 1), Vni(2000)).unwrap();
        let mut forged = b.clone();
        forged.vni = Vni(2001);
        assert_eq!(f.transmit(&a, &forged, b"x"), Delivery::Dropped(DropReason::DeadEndpoint));
        let mut elsewhere = b.clone();
        elsewhere.node = NodeId::from("n1");
        assert_eq!(f.transmit(&a, &elsewhere, b"x"), Delivery::Dropped(DropReason::DeadEndpoint));
        f.free_endpoint(&b).unwrap();
        assert_eq!(f.transmit(&a, &b, b"x"), Delivery::Dropped(DropReason::DeadEndpoint));
    }
}
