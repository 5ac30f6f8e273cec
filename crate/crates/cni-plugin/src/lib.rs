//! `cxi-cni`: a chained CNI plugin.
//!
//! ADD looks up the pod behind the container, and if its job carries a `vni`
//! annotation creates a CXI service whose member is the container's network
//! namespace inode. DEL removes whatever ADD recorded for the container. The
//! previous plugin's result is echoed untouched.

mod clients;
mod conf;
mod error;
mod plugin;
mod run;
mod state;

#[cfg(feature = "conformance")]
pub mod conformance;

pub use clients::{CxiControl, HttpCxi, HttpManagement, ManagementApi, RemoteError};
pub use conf::{Command, Invocation, NetConf, RuntimeConfig};
pub use error::{CniError, ErrorCode};
pub use plugin::{execute, execute_with, netns_inode, version_json, MAX_GRACE_PERIOD, SUPPORTED_VERSIONS};
pub use run::{run, Outcome};
pub use state::{ContainerEntry, StateFile, STATE_FILE};
