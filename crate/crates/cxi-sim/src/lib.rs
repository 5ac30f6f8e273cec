//! A simulated CXI NIC driver.
//!
//! Each node carries a registry of CXI services. A service binds exactly one
//! member (UID, GID or network namespace inode) to a set of VNIs. Endpoint
//! allocation authenticates the calling process against the registry once;
//! afterwards traffic flows without further checks, and the [`Fabric`] only
//! delivers between endpoints sharing a VNI whose services are still alive.

mod error;
mod fabric;
pub mod server;

pub use error::CxiError;
pub use fabric::{
    CxiService, Delivery, DropReason, EndpointHandle, Fabric, ProcessContext, ServiceId,
};
