//! Fixture cluster for plugin tests: a fake management API and a real CXI
//! simulator, both over HTTP.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::get;
use axum::{Json, Router};
use slingkube_core::api::mgmt::{ObjectRef, Phase, PodView, VniCrdView};
use slingkube_core::api::webhook::VniCrd;
use slingkube_core::server::{spawn, ServerHandle};
use slingkube_core::{NodeId, OwnerRef, Vni};
use slingkube_cxi::Fabric;

#[derive(Default)]
pub struct Mgmt {
    pub pods: HashMap<String, PodView>,
    pub crds: HashMap<String, Vec<VniCrdView>>,
}

impl Mgmt {
    pub fn add_pod(&mut self, uid: &str, job: &str, vni_annotation: Option<&str>, grace: f64, vni: Option<u16>) {
        let annotations: BTreeMap<_, _> = vni_annotation
            .map(|v| ("vni".to_owned(), v.to_owned()))
            .into_iter()
            .collect();
        self.pods.insert(
            uid.to_owned(),
            PodView {
                uid: uid.to_owned(),
                namespace: "ns".into(),
                name: format!("{job}-0"),
                phase: Phase::Pending,
                node: Some(NodeId::from("n0")),
                netns_inode: None,
                container_id: None,
                grace_period_seconds: grace,
                job: ObjectRef {
                    namespace: "ns".into(),
                    name: job.into(),
                },
                annotations,
                vni: vni.map(Vni),
            },
        );
        if let Some(v) = vni {
            let owner = OwnerRef::job("ns", job);
            self.crds.insert(
                owner.as_str().to_owned(),
                vec![VniCrdView {
                    owner,
                    crd: VniCrd {
                        name: VniCrd::child_name(job),
                        namespace: "ns".into(),
                        vni: Vni(v),
                        owning: true,
                        claim_name: None,
                    },
                }],
            );
        }
    }

    /// The pods the golden cases refer to.
    pub fn golden() -> Self {
        let mut m = Mgmt::default();
        m.add_pod("pod-annotated", "vni-test-job", Some("true"), 30.0, Some(1024));
        m.add_pod("pod-plain", "plain-job", None, 300.0, None);
        m.add_pod("pod-unbound", "unbound-job", Some("true"), 30.0, None);
        m.add_pod("pod-grace", "slow-job", Some("true"), 60.0, Some(1025));
        m
    }
}

async fn pod(State(m): State<Arc<Mgmt>>, Path(uid): Path<String>) -> Result<Json<PodView>, StatusCode> {
    m.pods.get(&uid).cloned().map(Json).ok_or(StatusCode::NOT_FOUND)
}

async fn crds(
    State(m): State<Arc<Mgmt>>,
    Query(q): Query<HashMap<String, String>>,
) -> Json<Vec<VniCrdView>> {
    let owner = q.get("owner").cloned().unwrap_or_default();
    Json(m.crds.get(&owner).cloned().unwrap_or_default())
}

pub struct Fixture {
    pub fabric: Arc<Fabric>,
    pub mgmt: ServerHandle,
    pub cxi: ServerHandle,
    pub state: tempfile::TempDir,
}

impl Fixture {
    pub fn start(mgmt: Mgmt) -> Self {
        let app = Router::new()
            .route("/api/pods/{uid}", get(pod))
            .route("/api/vnicrds", get(crds))
            .with_state(Arc::new(mgmt));
        let fabric = Arc::new(Fabric::new(["n0", "n1"]));
        Fixture {
            mgmt: spawn("fake-mgmt", "127.0.0.1:0".parse().unwrap(), app).unwrap(),
            cxi: slingkube_cxi::server::spawn(fabric.clone(), "127.0.0.1:0".parse().unwrap()).unwrap(),
            fabric,
            state: tempfile::tempdir().unwrap(),
        }
    }

    pub fn cxi_socket(&self) -> String {
        format!("{}/nodes/n0", self.cxi.base_url())
    }

    pub fn substitute(&self, text: &str) -> String {
        text.replace("{{MGMT}}", &self.mgmt.base_url())
            .replace("{{CXI}}", &self.cxi_socket())
            .replace("{{STATE}}", self.state.path().to_str().unwrap())
    }

    pub fn conf(&self, pod_uid: &str, prev_result: &str) -> String {
        format!(
            r#"{{"cniVersion":"1.0.0","name":"cxi","type":"cxi-cni","vniManagementApi":"{}","cxiSocket":"{}","stateDir":"{}","runtimeConfig":{{"podUid":"{pod_uid}"}},"prevResult":{prev_result}}}"#,
            self.mgmt.base_url(),
            self.cxi_socket(),
            self.state.path().display()
        )
    }
}

/// How a golden step is executed.
pub enum Exec<'a> {
    /// Spawn the plugin binary.
    Binary(&'a std::path::Path),
    /// Call [`crate::run`] directly.
    InProcess,
}

fn services_on_n0(fabric: &Fabric) -> String {
    let mut lines: Vec<String> = fabric
        .list_services(&NodeId::from("n0"))
        .unwrap()
        .iter()
        .map(|s| {
            let v = s.view();
            let vnis: Vec<String> = v.vnis.iter().map(|v| v.0.to_string()).collect();
            format!("{}:{} {}\n", kind_name(&v.member), v.member.value(), vnis.join(","))
        })
        .collect();
    lines.sort();
    lines.concat()
}

fn kind_name(m: &slingkube_core::MemberSpec) -> &'static str {
    match m.kind() {
        slingkube_core::MemberKind::Uid => "uid",
        slingkube_core::MemberKind::Gid => "gid",
        slingkube_core::MemberKind::Netns => "netns",
    }
}

/// Runs every step of one golden case against a fresh fixture. Each step is
/// `NN-name.{env,stdin,stdout,exit}` plus an optional `.services` listing the
/// expected registry of node n0 afterwards. Returns a description of the
/// first mismatch.
pub fn run_case(case: &std::path::Path, exec: &Exec) -> Result<usize, String> {
    use std::fs::read_to_string;

    let fx = Fixture::start(Mgmt::golden());
    let mut steps: Vec<_> = std::fs::read_dir(case)
        .map_err(|e| format!("{}: {e}", case.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "env"))
        .collect();
    steps.sort();
    for env_path in &steps {
        let step = env_path.with_extension("");
        let name = step.display().to_string();
        let read = |ext: &str| {
            read_to_string(step.with_extension(ext)).map_err(|e| format!("{name}.{ext}: {e}"))
        };
        let env: HashMap<String, String> = read("env")?
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_owned(), v.to_owned()))
            .collect();
        let stdin = fx.substitute(&read("stdin")?);
        let want_out = read("stdout")?;
        let want_ok = read("exit")?.trim() == "0";

        let (got_out, got_ok) = match exec {
            Exec::InProcess => {
                let o = crate::run(&env, stdin.into_bytes());
                let text = match o.stdout.is_empty() {
                    true => String::new(),
                    false => format!("{}\n", o.stdout),
                };
                (text, o.success)
            }
            Exec::Binary(bin) => {
                use std::io::Write;
                let mut child = std::process::Command::new(bin)
                    .env_clear()
                    .envs(&env)
                    .stdin(std::process::Stdio::piped())
                    .stdout(std::process::Stdio::piped())
                    .spawn()
                    .map_err(|e| format!("{name}: spawn: {e}"))?;
                child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
                let out = child.wait_with_output().map_err(|e| e.to_string())?;
                (String::from_utf8_lossy(&out.stdout).into_owned(), out.status.success())
            }
        };
        if got_out != want_out || got_ok != want_ok {
            return Err(format!(
                "{name}: expected exit ok={want_ok} stdout {want_out:?}, got ok={got_ok} stdout {got_out:?}"
            ));
        }
        if let Ok(want) = read("services") {
            let got = services_on_n0(&fx.fabric);
            if got != want {
                return Err(format!("{name}: registry {got:?}, expected {want:?}"));
            }
        }
    }
    Ok(steps.len())
}

/// Runs all cases under `root`; returns (case name, result) pairs.
pub fn run_all(root: &std::path::Path, exec: &Exec) -> Vec<(String, Result<usize, String>)> {
    let mut cases: Vec<_> = std::fs::read_dir(root)
        .into_iter()
        .flatten()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    cases.sort();
    cases
        .iter()
        .map(|c| {
            let name = c.file_name().unwrap().to_string_lossy().into_owned();
            (name, run_case(c, exec))
        })
        .collect()
}
