use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::thread;

use slingkube_core::api::webhook::{ParentObject, SyncRequest};
use slingkube_core::{Timestamp, Vni};
use slingkube_endpoint::{handle_finalize, handle_sync};
use slingkube_store::{AuditOp, StoreConfig, VniState, VniStore};

fn store() -> VniStore {
    VniStore::in_memory(StoreConfig::default()).unwrap()
}

fn job(name: &str, vni: &str) -> SyncRequest {
    let mut ann = BTreeMap::new();
    ann.insert("vni".to_owned(), vni.to_owned());
    SyncRequest {
        parent: ParentObject::job("vnitest", name, ann),
        children: Vec::new(),
    }
}

fn claim(name: &str) -> SyncRequest {
    SyncRequest {
        parent: ParentObject::claim("vnitest", name),
        children: Vec::new(),
    }
}

fn deleting(mut req: SyncRequest) -> SyncRequest {
    req.parent.metadata.deletion_requested = true;
    req
}

#[test]
fn claim_redemption_produces_virtual_child() {
    let s = store();
    let c = handle_sync(&s, &claim("vni-claim-test"), Timestamp(0.0)).unwrap();
    assert!(c.children[0].owning);
    let j = handle_sync(&s, &job("vni-test-job", "vni-claim-test"), Timestamp(1.0)).unwrap();
    let child = &j.children[0];
    assert!(!child.owning);
    assert_eq!(child.vni, c.children[0].vni);
    assert_eq!(child.claim_name.as_deref(), Some("vni-claim-test"));
    assert_eq!(child.namespace, "vnitest");
    let users = s.record(child.vni).unwrap().unwrap().users;
    assert_eq!(users, BTreeSet::from(["job:vnitest/vni-test-job".to_owned()]));
}

#[test]
fn missing_claim_blocks_job() {
    let s = store();
    let resp = handle_sync(&s, &job("j", "nonexistent-claim"), Timestamp(0.0)).unwrap();
    assert!(resp.children.is_empty());
    assert_eq!(resp.status["error"], "ClaimNotFound");
    assert_eq!(s.count_in_state(VniState::Allocated).unwrap(), 0);
}

#[test]
fn five_replays_are_identical() {
    for req in [job("vni-test-job", "true"), claim("c")] {
        let s = store();
        let first = serde_json::to_vec(&handle_sync(&s, &req, Timestamp(0.0)).unwrap()).unwrap();
        let snap = s.snapshot().unwrap();
        let log = s.audit_log(0).unwrap();
        for i in 1..=5 {
            let again = handle_sync(&s, &req, Timestamp(i as f64)).unwrap();
            assert_eq!(serde_json::to_vec(&again).unwrap(), first);
            assert_eq!(s.snapshot().unwrap(), snap);
        }
        let after = s.audit_log(0).unwrap();
        assert_eq!(after, log);
        assert_eq!(after.iter().filter(|r| r.op == AuditOp::Acquire).count(), 1);
    }
}

#[test]
fn claim_user_replay_is_idempotent() {
    let s = store();
    handle_sync(&s, &claim("c"), Timestamp(0.0)).unwrap();
    let mut req = job("j", "c");
    let first = handle_sync(&s, &req, Timestamp(1.0)).unwrap();
    let snap = s.snapshot().unwrap();
    for i in 0..5 {
        // with and without the observed child fed back
        if i % 2 == 1 {
            req.children = first.children.clone();
        }
        assert_eq!(handle_sync(&s, &req, Timestamp(2.0)).unwrap(), first);
        assert_eq!(s.snapshot().unwrap(), snap);
    }
}

#[test]
fn owning_job_release_enters_quarantine() {
    let s = store();
    let vni = handle_sync(&s, &job("j", "true"), Timestamp(0.0)).unwrap().children[0].vni;
    let resp = handle_finalize(&s, &deleting(job("j", "true")), Timestamp(42.5)).unwrap();
    assert!(resp.finalized);
    assert!(resp.children.is_empty());
    let rec = s.record(vni).unwrap().unwrap();
    assert_eq!(rec.state, VniState::Quarantined);
    assert_eq!(rec.released_at, Some(Timestamp(42.5)));
}

#[test]
fn claim_deletion_stalls_until_users_finish() {
    let s = store();
    let c = handle_sync(&s, &claim("c"), Timestamp(0.0)).unwrap();
    let vni = c.children[0].vni;
    let j1 = handle_sync(&s, &job("j1", "c"), Timestamp(1.0)).unwrap();
    let j2 = handle_sync(&s, &job("j2", "c"), Timestamp(1.0)).unwrap();

    let mut creq = deleting(claim("c"));
    creq.children = c.children.clone();
    let stalled = handle_finalize(&s, &creq, Timestamp(2.0)).unwrap();
    assert!(!stalled.finalized);
    assert_eq!(stalled.children, c.children);
    assert_eq!(s.record(vni).unwrap().unwrap().state, VniState::Allocated);

    let mut r1 = deleting(job("j1", "c"));
    r1.children = j1.children;
    assert!(handle_finalize(&s, &r1, Timestamp(3.0)).unwrap().finalized);
    assert!(!handle_finalize(&s, &creq, Timestamp(3.5)).unwrap().finalized);

    let mut r2 = deleting(job("j2", "c"));
    r2.children = j2.children;
    assert!(handle_finalize(&s, &r2, Timestamp(4.0)).unwrap().finalized);
    let done = handle_finalize(&s, &creq, Timestamp(5.0)).unwrap();
    assert!(done.finalized);
    assert!(done.children.is_empty());
    assert_eq!(s.record(vni).unwrap().unwrap().released_at, Some(Timestamp(5.0)));
}

#[test]
fn per_resource_jobs_get_distinct_vnis() {
    let s = store();
    let vnis: BTreeSet<Vni> = (0..20)
        .map(|i| handle_sync(&s, &job(&format!("j{i}"), "true"), Timestamp(0.0)).unwrap().children[0].vni)
        .collect();
    assert_eq!(vnis.len(), 20);
    assert_eq!(vnis.first(), Some(&Vni(1024)));
}

#[test]
fn claim_users_always_see_claim_vni() {
    let s = Arc::new(store());
    let cvni = handle_sync(&s, &claim("shared"), Timestamp(0.0)).unwrap().children[0].vni;
    let threads: Vec<_> = (0..16)
        .map(|i| {
            let s = s.clone();
            thread::spawn(move || {
                // interleave with unrelated per-resource traffic
                let own = handle_sync(&s, &job(&format!("own{i}"), "true"), Timestamp(1.0)).unwrap();
                let redeem = handle_sync(&s, &job(&format!("user{i}"), "shared"), Timestamp(1.0)).unwrap();
                handle_finalize(&s, &deleting(job(&format!("own{i}"), "true")), Timestamp(2.0)).unwrap();
                (own.children[0].vni, redeem.children[0].vni)
            })
        })
        .collect();
    for t in threads {
        let (own, redeemed) = t.join().unwrap();
        assert_eq!(redeemed, cvni);
        assert_ne!(own, cvni);
    }
    assert_eq!(s.record(cvni).unwrap().unwrap().users.len(), 16);
}

#[test]
fn at_most_one_child_per_parent() {
    let s = store();
    handle_sync(&s, &claim("c"), Timestamp(0.0)).unwrap();
    for value in ["true", "c", "false", "missing", "true"] {
        let mut req = job("j", value);
        for _ in 0..3 {
            let resp = handle_sync(&s, &req, Timestamp(1.0)).unwrap();
            assert!(resp.children.len() <= 1);
            req.children = resp.children;
        }
    }
}
