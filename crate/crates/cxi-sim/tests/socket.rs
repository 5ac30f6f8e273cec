use std::sync::Arc;

use serde_json::json;
use slingkube_core::api::cxi::{CreateServiceResponse, ServiceView};
use slingkube_core::{MemberSpec, NodeId, Vni};
use slingkube_cxi::{server, Fabric};

fn status_of(r: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> u16 {
    match r {
        Ok(resp) => resp.status().as_u16(),
        Err(ureq::Error::StatusCode(code)) => code,
        Err(e) => panic!("transport error {e}"),
    }
}

#[test]
fn create_list_delete_over_http() {
    let fabric = Arc::new(Fabric::new(["n0"]));
    let srv = server::spawn(fabric.clone(), "127.0.0.1:0".parse().unwrap()).unwrap();
    let base = srv.base_url();

    let mut resp = ureq::post(&format!("{base}/nodes/n0/services"))
        .send_json(json!({"member": {"kind": "netns", "value": 4026531840u64}, "vnis": [1024]}))
        .unwrap();
    assert_eq!(resp.status().as_u16(), 201);
    let created: CreateServiceResponse = resp.body_mut().read_json().unwrap();
    assert_eq!(created.id, 1);

    let listed: Vec<ServiceView> = ureq::get(&format!("{base}/nodes/n0/services"))
        .call()
        .unwrap()
        .body_mut()
        .read_json()
        .unwrap();
    assert_eq!(listed.len(), 1);
    assert_eq!(listed[0].member, MemberSpec::netns(4026531840));
    assert_eq!(listed[0].vnis, vec![Vni(1024)]);

    let del = ureq::delete(&format!("{base}/nodes/n0/services/1")).call();
    assert_eq!(status_of(del), 204);
    assert!(fabric.list_services(&NodeId::from("n0")).unwrap().is_empty());

    assert_eq!(status_of(ureq::delete(&format!("{base}/nodes/n0/services/1")).call()), 404);
    assert_eq!(status_of(ureq::get(&format!("{base}/nodes/n7/services")).call()), 404);
    let empty = ureq::post(&format!("{base}/nodes/n0/services"))
        .send_json(json!({"member": {"kind": "uid", "value": 1000}, "vnis": []}));
    assert_eq!(status_of(empty), 422);
}
