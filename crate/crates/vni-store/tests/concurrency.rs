use std::collections::HashSet;
use std::sync::{Arc, Mutex};
use std::thread;

use slingkube_core::{OwnerRef, Timestamp};
use slingkube_store::replay::Replayer;
use slingkube_store::{AuditOp, QuarantinePolicy, StoreConfig, VniStore};

#[test]
fn concurrent_acquires_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(VniStore::open(dir.path().join("vni.db"), StoreConfig::default()).unwrap());
    let handles: Vec<_> = (0..64)
        .map(|i| {
            let store = store.clone();
            thread::spawn(move || {
                let owner = OwnerRef(format!("job:ns/j{i}"));
                (owner.clone(), store.acquire(&owner, Timestamp(0.0)).unwrap())
            })
        })
        .collect();
    let got: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    let vnis: HashSet<_> = got.iter().map(|(_, v)| *v).collect();
    assert_eq!(vnis.len(), 64);
    // replaying against a single-threaded reference gives the same mapping
    for (owner, v) in &got {
        assert_eq!(store.lookup_owner(owner).unwrap(), Some(*v));
    }
    let log = store.audit_log(0).unwrap();
    assert_eq!(log.iter().filter(|r| r.op == AuditOp::Acquire).count(), 64);
}

#[test]
fn held_vnis_never_collide_under_churn() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = StoreConfig {
        quarantine: QuarantinePolicy::new(0.001).unwrap(),
        ..Default::default()
    };
    let store = Arc::new(VniStore::open(dir.path().join("vni.db"), cfg).unwrap());
    let held = Arc::new(Mutex::new(HashSet::new()));
    let clock = Arc::new(Mutex::new(0.0f64));
    let tick = {
        let clock = clock.clone();
        move || {
            let mut c = clock.lock().unwrap();
            *c += 0.01;
            Timestamp(*c)
        }
    };
    let threads: Vec<_> = (0..8)
        .map(|i| {
            let (store, held, tick) = (store.clone(), held.clone(), tick.clone());
            thread::spawn(move || {
                let owner = OwnerRef(format!("job:ns/t{i}"));
                for _ in 0..25 {
                    let v = store.acquire(&owner, tick()).unwrap();
                    assert!(held.lock().unwrap().insert(v), "{v} held twice");
                    held.lock().unwrap().remove(&v);
                    store.release(v, &owner, tick()).unwrap();
                }
            })
        })
        .collect();
    for t in threads {
        t.join().unwrap();
    }
    let mut replay = Replayer::new(cfg.quarantine);
    replay.apply_all(&store.audit_log(0).unwrap());
    assert_eq!(replay.state(), store.snapshot().unwrap());
}
