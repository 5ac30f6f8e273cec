use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use slingkube_core::{MemberSpec, NodeId, Vni};
use slingkube_cxi::{CxiError, Delivery, DropReason, Fabric, ProcessContext};

fn node(n: &str) -> NodeId {
    NodeId::from(n)
}

/// Independent statement of which (context, vni) pairs the three-service
/// registry must authorize.
fn reference_allows(uid: u64, gid: u64, netns: u64, vni: u16) -> bool {
    match vni {
        10 => uid == 7,
        11 => gid == 7,
        12 => netns == 7,
        _ => false,
    }
}

#[test]
fn member_kind_by_context_matrix() {
    let mut cases = 0;
    let mut granted = 0;
    for uid in [7, 8] {
        for gid in [7, 8] {
            for netns in [7, 8] {
                for vni in [10u16, 11, 12] {
                    let fabric = Fabric::new(["n0"]);
                    fabric.create_service(&node("n0"), MemberSpec::uid(7), [Vni(10)], None).unwrap();
                    fabric.create_service(&node("n0"), MemberSpec::gid(7), [Vni(11)], None).unwrap();
                    fabric.create_service(&node("n0"), MemberSpec::netns(7), [Vni(12)], None).unwrap();
                    let ctx = ProcessContext::new(uid, gid, netns).unwrap();
                    let got = fabric.alloc_endpoint(&node("n0"), &ctx, Vni(vni));
                    assert_eq!(
                        got.is_ok(),
                        reference_allows(uid, gid, netns, vni),
                        "uid={uid} gid={gid} netns={netns} vni={vni}"
                    );
                    if let Err(e) = got {
                        assert!(matches!(e, CxiError::PermissionDenied { .. }));
                    } else {
                        granted += 1;
                    }
                    cases += 1;
                }
            }
        }
    }
    assert_eq!(cases, 24);
    assert_eq!(granted, 12);
}

#[test]
fn transmit_toggle_matrix() {
    let (a, b) = (Vni(2000), Vni(2001));
    for src_vni in [a, b] {
        for dst_vni in [a, b] {
            for delete_src_service in [false, true] {
                let fabric = Fabric::new(["n0", "n1"]);
                let s = fabric
                    .create_service(&node("n0"), MemberSpec::netns(100), [src_vni], None)
                    .unwrap();
                fabric
                    .create_service(&node("n1"), MemberSpec::netns(200), [dst_vni], None)
                    .unwrap();
                let src = fabric
                    .alloc_endpoint(&node("n0"), &ProcessContext::new(0, 0, 100).unwrap(), src_vni)
                    .unwrap();
                let dst = fabric
                    .alloc_endpoint(&node("n1"), &ProcessContext::new(0, 0, 200).unwrap(), dst_vni)
                    .unwrap();
                if delete_src_service {
                    fabric.delete_service(&node("n0"), s).unwrap();
                }
                let expected = if delete_src_service {
                    Delivery::Dropped(DropReason::NoService)
                } else if src_vni != dst_vni {
                    Delivery::Dropped(DropReason::VniMismatch)
                } else {
                    Delivery::Delivered
                };
                assert_eq!(fabric.transmit(&src, &dst, b"ping"), expected);
            }
        }
    }
}

#[test]
fn list_services_tracks_shadow_set() {
    let fabric = Fabric::new(["n0"]);
    let mut rng = StdRng::seed_from_u64(7);
    let mut shadow = BTreeSet::new();
    for _ in 0..100 {
        if shadow.is_empty() || rng.random_bool(0.6) {
            let id = fabric
                .create_service(&node("n0"), MemberSpec::uid(rng.random_range(0..5)), [Vni(3000)], None)
                .unwrap();
            assert!(shadow.insert(id), "fresh id");
        } else {
            let idx = rng.random_range(0..shadow.len());
            let id = *shadow.iter().nth(idx).unwrap();
            fabric.delete_service(&node("n0"), id).unwrap();
            shadow.remove(&id);
        }
        let listed: BTreeSet<_> = fabric
            .list_services(&node("n0"))
            .unwrap()
            .into_iter()
            .map(|s| s.id)
            .collect();
        assert_eq!(listed, shadow);
    }
}

#[derive(Clone, Debug)]
enum Step {
    Create { node: usize, netns: u64, vni: u16 },
    Delete { pick: usize },
    Alloc { node: usize, netns: u64, vni: u16 },
    Send { from: usize, to: usize },
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        (0..2usize, 1..4u64, 0..2u16).prop_map(|(node, netns, vni)| Step::Create { node, netns, vni }),
        any::<usize>().prop_map(|pick| Step::Delete { pick }),
        (0..2usize, 1..4u64, 0..2u16).prop_map(|(node, netns, vni)| Step::Alloc { node, netns, vni }),
        (any::<usize>(), any::<usize>()).prop_map(|(from, to)| Step::Send { from, to }),
    ]
}

proptest! {
    /// Endpoints on different VNIs never exchange traffic, and every
    /// successful allocation is backed by a service that existed and matched.
    #[test]
    fn isolation_and_soundness_under_interleavings(steps in prop::collection::vec(step(), 1..80)) {
        let nodes = [node("n0"), node("n1")];
        let fabric = Fabric::new(["n0", "n1"]);
        let mut services = Vec::new();
        let mut endpoints = Vec::new();
        for s in steps {
            match s {
                Step::Create { node: n, netns, vni } => {
                    let id = fabric
                        .create_service(&nodes[n], MemberSpec::netns(netns), [Vni(2000 + vni)], None)
                        .unwrap();
                    services.push((n, id));
                }
                Step::Delete { pick } => {
                    if !services.is_empty() {
                        let (n, id) = services.remove(pick % services.len());
                        fabric.delete_service(&nodes[n], id).unwrap();
                        let ctx = ProcessContext::new(0, 0, 1).unwrap();
                        // nothing may authenticate through a deleted id
                        if let Ok(h) = fabric.alloc_endpoint(&nodes[n], &ctx, Vni(2000)) {
                            prop_assert_ne!(h.service_id, id);
                        }
                    }
                }
                Step::Alloc { node: n, netns, vni } => {
                    let before = fabric.list_services(&nodes[n]).unwrap();
                    let ctx = ProcessContext::new(0, 0, netns).unwrap();
                    if let Ok(h) = fabric.alloc_endpoint(&nodes[n], &ctx, Vni(2000 + vni)) {
                        let svc = before.iter().find(|s| s.id == h.service_id).unwrap();
                        prop_assert_eq!(svc.member, MemberSpec::netns(netns));
                        prop_assert!(svc.vnis.contains(&h.vni));
                        endpoints.push(h);
                    }
                }
                Step::Send { from, to } => {
                    if !endpoints.is_empty() {
                        let a = &endpoints[from % endpoints.len()];
                        let b = &endpoints[to % endpoints.len()];
                        let d = fabric.transmit(a, b, b"x");
                        if a.vni != b.vni {
                            prop_assert_ne!(d, Delivery::Delivered);
                        }
                        let live = |h: &slingkube_cxi::EndpointHandle| {
                            fabric.list_services(&h.node).unwrap().iter().any(|s| s.id == h.service_id)
                        };
                        if !live(a) || !live(b) {
                            prop_assert_eq!(d, Delivery::Dropped(DropReason::NoService));
                        }
                    }
                }
            }
        }
    }

    /// Only the netns inode decides against a netns-member service.
    #[test]
    fn uid_and_gid_do_not_influence_netns_services(uid in any::<u64>(), gid in any::<u64>(), inode in 1..1000u64) {
        let fabric = Fabric::new(["n0"]);
        fabric.create_service(&node("n0"), MemberSpec::netns(500), [Vni(2000)], None).unwrap();
        let ok = fabric
            .alloc_endpoint(&node("n0"), &ProcessContext::new(uid, gid, inode).unwrap(), Vni(2000))
            .is_ok();
        prop_assert_eq!(ok, inode == 500);
    }
}
