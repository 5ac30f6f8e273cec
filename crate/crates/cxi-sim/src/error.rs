use slingkube_core::{NodeId, Vni};

use crate::fabric::ServiceId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CxiError {
    #[error("a CXI service needs at least one VNI")]
    EmptyVniSet,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no service {id} on node {node}")]
    UnknownService { node: NodeId, id: ServiceId },
    #[error("no CXI service on {node} authorizes this process for VNI {vni}")]
    PermissionDenied { node: NodeId, vni: Vni },
    #[error("every matching service on {node} is at its endpoint limit")]
    EndpointQuotaExceeded { node: NodeId },
    #[error("endpoint {endpoint} on {node} is not live")]
    UnknownEndpoint { node: NodeId, endpoint: u64 },
    #[error("network namespace inode 0 is invalid")]
    InvalidNetns,
}
