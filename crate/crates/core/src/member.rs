use std::fmt;

use serde::{Deserialize, Serialize};

/// How a CXI service identifies its member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemberKind {
    Uid,
    Gid,
    /// Network namespace, identified by the inode of its nsfs file.
    Netns,
}

/// The single member a CXI service authorizes. Netns values are opaque inode
/// numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemberSpec {
    kind: MemberKind,
    value: u64,
}

impl MemberSpec {
    pub fn new(kind: MemberKind, value: u64) -> Self {
        Self { kind, value }
    }

    pub fn uid(value: u64) -> Self {
        Self::new(MemberKind::Uid, value)
    }

    pub fn gid(value: u64) -> Self {
        Self::new(MemberKind::Gid, value)
    }

    pub fn netns(inode: u64) -> Self {
        Self::new(MemberKind::Netns, inode)
    }

    pub fn kind(&self) -> MemberKind {
        self.kind
    }

    pub fn value(&self) -> u64 {
        self.value
    }
}

impl fmt::Display for MemberSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            MemberKind::Uid => "UID",
            MemberKind::Gid => "GID",
            MemberKind::Netns => "NETNS",
        };
        write!(f, "{k}:{}", self.value)
    }
}
