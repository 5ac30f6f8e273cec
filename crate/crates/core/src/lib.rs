//! Domain and wire types shared by every slingkube component.
//!
//! The components talk to each other over small HTTP+JSON surfaces (the CXI
//! management socket, the VNI webhooks and the cluster management API). The
//! payloads for those surfaces live in [`api`] so that servers and clients
//! agree on one serde definition.

pub mod api;
mod clock;
mod member;
mod names;
mod vni;

pub use clock::{Clock, Timestamp, VirtualClock, WallClock};
pub use member::{MemberKind, MemberSpec};
pub use names::{NodeId, OwnerRef};
pub use vni::{Vni, VniRange, VniRangeError, RESERVED_VNI_CEILING};

#[cfg(feature = "server")]
pub mod server;
