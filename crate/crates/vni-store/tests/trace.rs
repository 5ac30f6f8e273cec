mod common;

use common::model::{Model, Slot};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use slingkube_core::{OwnerRef, Timestamp, Vni, VniRange};
use slingkube_store::replay::Replayer;
use slingkube_store::{QuarantinePolicy, StoreConfig, StoreError, VniState, VniStore};

fn err_name(e: &StoreError) -> &'static str {
    match e {
        StoreError::PoolExhausted => "PoolExhausted",
        StoreError::NotOwner { .. } => "NotOwner",
        StoreError::NotAllocated(_) => "NotAllocated",
        StoreError::UsersRemain { .. } => "UsersRemain",
        other => panic!("unexpected store error {other}"),
    }
}

fn small_store(start: u16, end: u16, quarantine: f64) -> VniStore {
    VniStore::in_memory(StoreConfig {
        pool: VniRange::new(start, end).unwrap(),
        quarantine: QuarantinePolicy::new(quarantine).unwrap(),
        ..Default::default()
    })
    .unwrap()
}

/// Drives the store and the reference model with the same random trace and
/// compares every result, the final table and the audit log length.
fn run_trace(seed: u64, len: usize) {
    let (start, end, q) = (1024, 1039, 30.0);
    let store = small_store(start, end, q);
    let mut model = Model::new(start, end, q);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut now = 0.0f64;
    let mut expected_log = 0usize;
    let owners: Vec<String> = (0..24).map(|i| format!("job:ns/o{i}")).collect();
    let users: Vec<String> = (0..6).map(|i| format!("job:ns/u{i}")).collect();

    for _ in 0..len {
        now += rng.random_range(0.0..4.0);
        let t = Timestamp(now);
        let owner = &owners[rng.random_range(0..owners.len())];
        match rng.random_range(0..10) {
            0..=3 => {
                let (want, logged) = model.acquire(owner, now);
                let got = store.acquire(&OwnerRef(owner.clone()), t);
                assert_eq!(got.as_ref().map(|v| v.0).map_err(err_name), want);
                expected_log += logged as usize;
            }
            4..=6 => {
                // mostly release what the owner holds, sometimes a random VNI
                let v = match model.holders.get(owner) {
                    Some(&v) if rng.random_bool(0.8) => v,
                    _ => rng.random_range(start..=end + 1),
                };
                let (want, logged) = model.release(v, owner, now);
                let got = store.release(Vni(v), &OwnerRef(owner.clone()), t);
                assert_eq!(got.map_err(|e| err_name(&e)), want);
                expected_log += logged as usize;
            }
            7 | 8 => {
                let v = rng.random_range(start..=end);
                let user = &users[rng.random_range(0..users.len())];
                let (want, logged) = model.add_user(v, user);
                assert_eq!(store.add_user(Vni(v), user, t).map_err(|e| err_name(&e)), want);
                expected_log += logged as usize;
            }
            _ => {
                let v = rng.random_range(start..=end);
                let user = &users[rng.random_range(0..users.len())];
                let (want, logged) = model.remove_user(v, user);
                assert_eq!(store.remove_user(Vni(v), user, t).map_err(|e| err_name(&e)), want);
                expected_log += logged as usize;
            }
        }
    }

    for rec in store.snapshot().unwrap() {
        let slot = &model.slots[&rec.vni.0];
        match (rec.state, slot) {
            (VniState::Allocated, Slot::Allocated(o)) => {
                assert_eq!(rec.owner.as_ref().unwrap().as_str(), o);
                assert_eq!(rec.users, model.users_of(rec.vni.0));
            }
            (VniState::Quarantined, Slot::Quarantined(at)) => {
                assert_eq!(rec.released_at, Some(Timestamp(*at)))
            }
            other => panic!("state mismatch for {}: {other:?}", rec.vni),
        }
    }
    let non_free = model.slots.values().filter(|s| **s != Slot::Free).count();
    assert_eq!(store.snapshot().unwrap().len(), non_free);

    let log = store.audit_log(0).unwrap();
    assert_eq!(log.len(), expected_log);

    let mut replay = Replayer::new(QuarantinePolicy::new(q).unwrap());
    replay.apply_all(&log);
    assert!(replay.violations().is_empty(), "{:?}", replay.violations());
    assert_eq!(replay.state(), store.snapshot().unwrap());
}

#[test]
fn random_trace_500_matches_reference() {
    run_trace(1, 500);
}

#[test]
fn several_seeds_match_reference() {
    for seed in 2..6 {
        run_trace(seed, 300);
    }
}

#[test]
fn shadow_set_user_trace() {
    let store = small_store(1024, 1030, 30.0);
    let v = store.acquire(&"claim:ns/c".into(), Timestamp(0.0)).unwrap();
    let mut rng = StdRng::seed_from_u64(99);
    let mut shadow = std::collections::BTreeSet::new();
    for i in 0..200 {
        let user = format!("job:ns/{}", rng.random_range(0..10));
        if rng.random_bool(0.5) {
            store.add_user(v, &user, Timestamp(i as f64)).unwrap();
            shadow.insert(user);
        } else {
            let left = store.remove_user(v, &user, Timestamp(i as f64)).unwrap();
            shadow.remove(&user);
            assert_eq!(left, shadow.len());
        }
    }
    assert_eq!(store.record(v).unwrap().unwrap().users, shadow);
}

#[test]
fn pool_mismatch_on_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vni.db");
    drop(VniStore::open(&path, StoreConfig::default()).unwrap());
    let other = StoreConfig {
        pool: VniRange::new(2000, 3000).unwrap(),
        ..Default::default()
    };
    assert!(matches!(
        VniStore::open(&path, other),
        Err(StoreError::PoolMismatch { .. })
    ));
}

#[test]
fn committed_state_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vni.db");
    let (snapshot, log) = {
        let store = VniStore::open(&path, StoreConfig::default()).unwrap();
        let c: OwnerRef = "claim:ns/c".into();
        let v = store.acquire(&c, Timestamp(1.0)).unwrap();
        store.add_user(v, "job:ns/j", Timestamp(2.0)).unwrap();
        let j: OwnerRef = "job:ns/k".into();
        let w = store.acquire(&j, Timestamp(3.0)).unwrap();
        store.release(w, &j, Timestamp(4.0)).unwrap();
        (store.snapshot().unwrap(), store.audit_log(0).unwrap())
        // dropped without any shutdown step
    };
    let store = VniStore::open(&path, StoreConfig::default()).unwrap();
    assert_eq!(store.snapshot().unwrap(), snapshot);
    assert_eq!(store.audit_log(0).unwrap(), log);
    assert_eq!(store.lookup_owner(&"claim:ns/c".into()).unwrap(), Some(Vni(1024)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// No acquire returns a VNI within the quarantine window of its release.
    #[test]
    fn quarantine_safety(gaps in prop::collection::vec(0.0f64..20.0, 1..60), q in 1.0f64..40.0) {
        let store = small_store(1024, 1026, q);
        let mut released: std::collections::HashMap<u16, f64> = Default::default();
        let mut now = 0.0;
        for (i, gap) in gaps.iter().enumerate() {
            now += gap;
            let owner = OwnerRef(format!("job:ns/{i}"));
            if let Ok(v) = store.acquire(&owner, Timestamp(now)) {
                if let Some(at) = released.get(&v.0) {
                    prop_assert!(now - at > q);
                }
                now += 0.5;
                store.release(v, &owner, Timestamp(now)).unwrap();
                released.insert(v.0, now);
            }
        }
    }
}
