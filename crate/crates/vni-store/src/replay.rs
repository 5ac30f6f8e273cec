//! Rebuilds VNI state from the audit log, independent of the SQL path, and
//! flags any record that would break mutual exclusivity or quarantine.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use slingkube_core::{OwnerRef, Vni};

use crate::types::{AuditOp, AuditRecord, Outcome, VniRecord, VniState};
use crate::QuarantinePolicy;

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub seq: u64,
    pub what: String,
}

#[derive(Debug)]
pub struct Replayer {
    quarantine: QuarantinePolicy,
    records: BTreeMap<Vni, VniRecord>,
    owners: HashMap<OwnerRef, Vni>,
    last_seq: u64,
    violations: Vec<Violation>,
}

impl Replayer {
    pub fn new(quarantine: QuarantinePolicy) -> Self {
        Self {
            quarantine,
            records: BTreeMap::new(),
            owners: HashMap::new(),
            last_seq: 0,
            violations: Vec::new(),
        }
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn apply_all<'a>(&mut self, records: impl IntoIterator<Item = &'a AuditRecord>) {
        for r in records {
            self.apply(r);
        }
    }

    pub fn apply(&mut self, r: &AuditRecord) {
        if r.seq <= self.last_seq {
            self.flag(r.seq, format!("sequence not increasing after {}", self.last_seq));
        }
        self.last_seq = self.last_seq.max(r.seq);
        if r.outcome != Outcome::Ok {
            return;
        }
        let Some(vni) = r.vni else {
            self.flag(r.seq, "successful record without a VNI".into());
            return;
        };
        let rec = self
            .records
            .entry(vni)
            .or_insert_with(|| VniRecord::free(vni))
            .clone();
        match r.op {
            AuditOp::Acquire => {
                let owner = OwnerRef(r.actor.clone());
                match rec.state {
                    VniState::Allocated => self.flag(r.seq, format!("{vni} acquired while allocated")),
                    VniState::Quarantined => {
                        let released = rec.released_at.unwrap_or_default();
                        if !self.quarantine.expired(released, r.at) {
                            self.flag(
                                r.seq,
                                format!("{vni} reused {:.3}s after release", r.at.since(released)),
                            );
                        }
                    }
                    VniState::Free => {}
                }
                if let Some(held) = self.owners.get(&owner) {
                    self.flag(r.seq, format!("{owner} already holds {held}"));
                }
                self.owners.insert(owner.clone(), vni);
                self.records.insert(
                    vni,
                    VniRecord {
                        vni,
                        state: VniState::Allocated,
                        owner: Some(owner),
                        users: BTreeSet::new(),
                        released_at: None,
                    },
                );
            }
            AuditOp::Release => {
                if rec.owner.as_ref().map(|o| o.as_str()) != Some(r.actor.as_str()) {
                    self.flag(r.seq, format!("{vni} released by non-owner {}", r.actor));
                }
                if !rec.users.is_empty() {
                    self.flag(r.seq, format!("{vni} released with users left"));
                }
                if let Some(o) = &rec.owner {
                    self.owners.remove(o);
                }
                self.records.insert(
                    vni,
                    VniRecord {
                        vni,
                        state: VniState::Quarantined,
                        owner: None,
                        users: BTreeSet::new(),
                        released_at: Some(r.at),
                    },
                );
            }
            AuditOp::AddUser | AuditOp::RemoveUser => {
                if rec.state != VniState::Allocated {
                    self.flag(r.seq, format!("user change on unallocated {vni}"));
                }
                let users = &mut self.records.get_mut(&vni).unwrap().users;
                let changed = if r.op == AuditOp::AddUser {
                    users.insert(r.actor.clone())
                } else {
                    users.remove(&r.actor)
                };
                if !changed {
                    self.flag(r.seq, format!("no-op user change logged for {vni}"));
                }
            }
        }
    }

    /// Non-free VNIs, ordered like [`crate::VniStore::snapshot`].
    pub fn state(&self) -> Vec<VniRecord> {
        self.records
            .values()
            .filter(|r| r.state != VniState::Free)
            .cloned()
            .collect()
    }

    fn flag(&mut self, seq: u64, what: String) {
        self.violations.push(Violation { seq, what });
    }
}
