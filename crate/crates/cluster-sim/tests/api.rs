mod common;

use std::collections::BTreeMap;

use common::{env, vni};
use slingkube_core::api::mgmt::{JobView, PodView, VniCrdView};
use slingkube_core::Timestamp;
use slingkube_sim::JobSpec;

fn get(url: &str) -> (u16, String) {
    let mut resp = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .new_agent()
        .get(url)
        .call()
        .unwrap();
    (resp.status().as_u16(), resp.body_mut().read_to_string().unwrap())
}

#[test]
fn unknown_objects_are_404() {
    let env = env();
    let base = env.mgmt_url();
    assert_eq!(get(&format!("{base}/api/pods/pod-99999999")).0, 404);
    assert_eq!(get(&format!("{base}/api/jobs/a/none")).0, 404);
    let (code, body) = get(&format!("{base}/api/vnicrds?owner=job:a/none"));
    assert_eq!((code, body.as_str()), (200, "[]"));
}

#[test]
fn views_round_trip_annotations_and_vni() {
    let env = env();
    let mut ann = vni("true");
    ann.insert("team".into(), "ml/ops: \"quoted\" ✓".into());
    env.cluster.submit_job("a", "j", ann.clone(), JobSpec::long_running(1)).unwrap();
    env.cluster.run_until(Timestamp(3.0), 1000).unwrap();
    let base = env.mgmt_url();

    let (code, body) = get(&format!("{base}/api/jobs/a/j"));
    assert_eq!(code, 200);
    let job: JobView = serde_json::from_str(&body).unwrap();
    assert_eq!(job.annotations, ann);
    let crd = job.vni_crd.clone().unwrap();

    let (code, body) = get(&format!("{base}/api/pods/{}", job.pods[0]));
    assert_eq!(code, 200);
    let pod: PodView = serde_json::from_str(&body).unwrap();
    assert_eq!(pod.annotations, ann);
    assert_eq!(pod.vni, Some(crd.vni));
    assert_eq!(pod.grace_period_seconds, 30.0);
    assert_eq!(pod.container_id.as_deref(), Some(format!("ctr-{}", pod.uid).as_str()));
    assert_eq!(Some(pod), env.cluster.pod_view(&job.pods[0]));

    let (_, body) = get(&format!("{base}/api/vnicrds?owner=job:a/j"));
    let crds: Vec<VniCrdView> = serde_json::from_str(&body).unwrap();
    assert_eq!(crds.len(), 1);
    assert_eq!(crds[0].crd, crd);
    let (_, body) = get(&format!("{base}/api/vnicrds"));
    let all: Vec<VniCrdView> = serde_json::from_str(&body).unwrap();
    assert_eq!(all, crds);
    let _: BTreeMap<String, serde_json::Value> = job.status;
}
