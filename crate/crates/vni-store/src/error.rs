use slingkube_core::{OwnerRef, Vni};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("no VNI is free or out of quarantine")]
    PoolExhausted,
    #[error("VNI {vni} is not owned by {owner}")]
    NotOwner { vni: Vni, owner: OwnerRef },
    #[error("VNI {0} is not allocated")]
    NotAllocated(Vni),
    #[error("VNI {vni} still has {users} user(s)")]
    UsersRemain { vni: Vni, users: usize },
    #[error("store was created for pool {stored}, opened with {requested}")]
    PoolMismatch { stored: String, requested: String },
    #[error("quarantine duration must be positive, got {0}")]
    InvalidQuarantine(f64),
    #[error("corrupt store: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Db(#[from] rusqlite::Error),
}
