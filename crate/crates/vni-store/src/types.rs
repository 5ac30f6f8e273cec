use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use slingkube_core::{OwnerRef, Timestamp, Vni};

use crate::StoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VniState {
    Free,
    Allocated,
    Quarantined,
}

impl VniState {
    pub(crate) fn as_sql(self) -> &'static str {
        match self {
            VniState::Free => "free",
            VniState::Allocated => "allocated",
            VniState::Quarantined => "quarantined",
        }
    }
}

impl FromStr for VniState {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "free" => Ok(VniState::Free),
            "allocated" => Ok(VniState::Allocated),
            "quarantined" => Ok(VniState::Quarantined),
            other => Err(StoreError::Corrupt(format!("unknown state {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VniRecord {
    pub vni: Vni,
    pub state: VniState,
    pub owner: Option<OwnerRef>,
    pub users: BTreeSet<String>,
    pub released_at: Option<Timestamp>,
}

impl VniRecord {
    pub fn free(vni: Vni) -> Self {
        Self {
            vni,
            state: VniState::Free,
            owner: None,
            users: BTreeSet::new(),
            released_at: None,
        }
    }
}

/// How long a released VNI stays unavailable.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuarantinePolicy {
    duration: f64,
}

impl QuarantinePolicy {
    pub fn new(seconds: f64) -> Result<Self, StoreError> {
        if seconds > 0.0 && seconds.is_finite() {
            Ok(Self { duration: seconds })
        } else {
            Err(StoreError::InvalidQuarantine(seconds))
        }
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// A VNI released at `released_at` may be handed out at `now`.
    pub fn expired(&self, released_at: Timestamp, now: Timestamp) -> bool {
        now.0 - released_at.0 > self.duration
    }
}

impl Default for QuarantinePolicy {
    fn default() -> Self {
        Self { duration: 30.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuditOp {
    Acquire,
    Release,
    AddUser,
    RemoveUser,
}

impl AuditOp {
    pub(crate) fn as_sql(self) -> &'static str {
        match self {
            AuditOp::Acquire => "acquire",
            AuditOp::Release => "release",
            AuditOp::AddUser => "add_user",
            AuditOp::RemoveUser => "remove_user",
        }
    }
}

impl FromStr for AuditOp {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "acquire" => Ok(AuditOp::Acquire),
            "release" => Ok(AuditOp::Release),
            "add_user" => Ok(AuditOp::AddUser),
            "remove_user" => Ok(AuditOp::RemoveUser),
            other => Err(StoreError::Corrupt(format!("unknown audit op {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DenyReason {
    PoolExhausted,
    NotOwner,
    NotAllocated,
    UsersRemain,
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DenyReason::PoolExhausted => "PoolExhausted",
            DenyReason::NotOwner => "NotOwner",
            DenyReason::NotAllocated => "NotAllocated",
            DenyReason::UsersRemain => "UsersRemain",
        };
        f.write_str(s)
    }
}

impl FromStr for DenyReason {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "PoolExhausted" => Ok(DenyReason::PoolExhausted),
            "NotOwner" => Ok(DenyReason::NotOwner),
            "NotAllocated" => Ok(DenyReason::NotAllocated),
            "UsersRemain" => Ok(DenyReason::UsersRemain),
            other => Err(StoreError::Corrupt(format!("unknown deny reason {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "reason", rename_all = "lowercase")]
pub enum Outcome {
    Ok,
    Denied(DenyReason),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub at: Timestamp,
    pub op: AuditOp,
    /// Absent only for an acquire denied with `PoolExhausted`.
    pub vni: Option<Vni>,
    pub actor: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}
