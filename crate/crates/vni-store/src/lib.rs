//! The VNI database.
//!
//! Every VNI in the configured pool is Free, Allocated (to exactly one owner,
//! with an optional set of users) or Quarantined after release. A released
//! VNI becomes eligible again only once strictly more than the quarantine
//! duration has elapsed, which covers pods that outlive their job.
//!
//! Each operation runs as one SQLite transaction, so concurrent acquires
//! cannot observe the same free VNI. All state changes and all denied
//! requests are appended to an audit log that can be replayed with
//! [`replay::Replayer`].

mod error;
pub mod replay;
mod schema;
mod store;
mod types;

pub use error::StoreError;
pub use store::{Durability, StoreConfig, VniStore};
pub use types::{AuditOp, AuditRecord, DenyReason, Outcome, QuarantinePolicy, VniRecord, VniState};
