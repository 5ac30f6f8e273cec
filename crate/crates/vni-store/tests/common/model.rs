//! Single-threaded reference state machine for the VNI database. Plain maps,
//! no SQL; used as the oracle for randomized traces.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Clone, Debug, PartialEq)]
pub enum Slot {
    Free,
    Allocated(String),
    Quarantined(f64),
}

#[derive(Debug)]
pub struct Model {
    pub start: u16,
    pub end: u16,
    pub quarantine: f64,
    pub slots: BTreeMap<u16, Slot>,
    pub holders: HashMap<String, u16>,
    pub users: BTreeMap<u16, BTreeSet<String>>,
}

/// Result of one call plus whether it should appear in the audit log.
pub type Step<T> = (Result<T, &'static str>, bool);

impl Model {
    pub fn new(start: u16, end: u16, quarantine: f64) -> Self {
        Self {
            start,
            end,
            quarantine,
            slots: (start..=end).map(|v| (v, Slot::Free)).collect(),
            holders: HashMap::new(),
            users: BTreeMap::new(),
        }
    }

    pub fn acquire(&mut self, owner: &str, now: f64) -> Step<u16> {
        if let Some(&v) = self.holders.get(owner) {
            return (Ok(v), false);
        }
        let pick = self.slots.iter().find_map(|(&v, s)| match s {
            Slot::Free => Some(v),
            Slot::Quarantined(at) if now - at > self.quarantine => Some(v),
            _ => None,
        });
        match pick {
            Some(v) => {
                self.slots.insert(v, Slot::Allocated(owner.to_owned()));
                self.holders.insert(owner.to_owned(), v);
                (Ok(v), true)
            }
            None => (Err("PoolExhausted"), true),
        }
    }

    pub fn release(&mut self, v: u16, owner: &str, now: f64) -> Step<()> {
        match self.slots.get(&v) {
            Some(Slot::Allocated(o)) if o == owner => {}
            Some(Slot::Allocated(_)) => return (Err("NotOwner"), true),
            _ => return (Err("NotAllocated"), true),
        }
        if self.users.get(&v).is_some_and(|u| !u.is_empty()) {
            return (Err("UsersRemain"), true);
        }
        self.slots.insert(v, Slot::Quarantined(now));
        self.holders.remove(owner);
        (Ok(()), true)
    }

    pub fn add_user(&mut self, v: u16, user: &str) -> Step<()> {
        if !matches!(self.slots.get(&v), Some(Slot::Allocated(_))) {
            return (Err("NotAllocated"), true);
        }
        let added = self.users.entry(v).or_default().insert(user.to_owned());
        (Ok(()), added)
    }

    pub fn remove_user(&mut self, v: u16, user: &str) -> Step<usize> {
        if !matches!(self.slots.get(&v), Some(Slot::Allocated(_))) {
            return (Err("NotAllocated"), true);
        }
        let set = self.users.entry(v).or_default();
        let removed = set.remove(user);
        (Ok(set.len()), removed)
    }

    pub fn users_of(&self, v: u16) -> BTreeSet<String> {
        self.users.get(&v).cloned().unwrap_or_default()
    }
}
