use std::thread;
use std::time::Duration;

use slingkube_core::api::cxi::CreateServiceRequest;
use slingkube_core::api::webhook::VniRequest;
use slingkube_core::{MemberSpec, OwnerRef};

use crate::clients::{CxiControl, HttpCxi, HttpManagement, ManagementApi, RemoteError};
use crate::conf::{Command, Invocation, NetConf};
use crate::error::{CniError, ErrorCode};
use crate::state::{ContainerEntry, StateFile};

pub const SUPPORTED_VERSIONS: [&str; 4] = ["0.3.0", "0.3.1", "0.4.0", "1.0.0"];

/// Longest termination grace period accepted for a pod that uses a VNI. Must
/// not exceed the VNI reuse quarantine.
pub const MAX_GRACE_PERIOD: f64 = 30.0;

const DEL_ATTEMPTS: u32 = 3;

pub fn version_json() -> String {
    serde_json::json!({
        "cniVersion": "1.0.0",
        "supportedVersions": SUPPORTED_VERSIONS,
    })
    .to_string()
}

/// Inode of a network namespace path. `sim-netns:<inode>` names a simulated
/// namespace; anything else is stat'ed.
pub fn netns_inode(path: &str) -> Result<u64, CniError> {
    let bad = |details: String| CniError::new(ErrorCode::InvalidNetns, "cannot resolve network namespace", details);
    let inode = match path.strip_prefix("sim-netns:") {
        Some(n) => n.parse::<u64>().map_err(|e| bad(format!("{path}: {e}")))?,
        None => {
            use std::os::unix::fs::MetadataExt;
            std::fs::metadata(path).map_err(|e| bad(format!("{path}: {e}")))?.ino()
        }
    };
    if inode == 0 {
        return Err(bad(format!("{path}: inode 0")));
    }
    Ok(inode)
}

fn remote(what: &str, e: RemoteError) -> CniError {
    match e {
        RemoteError::Unreachable(d) => CniError::new(ErrorCode::TryAgainLater, format!("{what} unreachable"), d),
        other => CniError::new(ErrorCode::CxiServiceFailed, format!("{what} request failed"), other.to_string()),
    }
}

fn io_err(e: std::io::Error) -> CniError {
    CniError::new(ErrorCode::InvalidConfig, "state directory unusable", e.to_string())
}

fn require_ids(inv: &Invocation) -> Result<(), CniError> {
    if inv.container_id.is_empty() || inv.netns.is_empty() {
        return Err(CniError::new(
            ErrorCode::InvalidEnvironment,
            "CNI_CONTAINERID and CNI_NETNS are required",
            String::new(),
        ));
    }
    Ok(())
}

/// The chained result: the previous plugin's result, byte for byte.
fn passthrough(conf: &NetConf) -> String {
    match &conf.prev_result {
        Some(raw) => raw.get().to_owned(),
        None => serde_json::json!({ "cniVersion": conf.cni_version }).to_string(),
    }
}

/// Runs one invocation with HTTP clients built from the configuration.
/// Returns what belongs on stdout.
pub fn execute(inv: &Invocation) -> Result<Option<String>, CniError> {
    if inv.command == Command::Version {
        return Ok(Some(version_json()));
    }
    let conf = NetConf::parse(&inv.stdin)?;
    let mgmt = HttpManagement::new(&conf.vni_management_api);
    let cxi = HttpCxi::new(&conf.cxi_socket);
    execute_with(inv, &conf, &mgmt, &cxi)
}

pub fn execute_with(
    inv: &Invocation,
    conf: &NetConf,
    mgmt: &dyn ManagementApi,
    cxi: &dyn CxiControl,
) -> Result<Option<String>, CniError> {
    if inv.command == Command::Version {
        return Ok(Some(version_json()));
    }
    if !SUPPORTED_VERSIONS.contains(&conf.cni_version.as_str()) {
        return Err(CniError::new(
            ErrorCode::IncompatibleVersion,
            "unsupported cniVersion",
            conf.cni_version.clone(),
        ));
    }
    require_ids(inv)?;
    match inv.command {
        Command::Add => add(inv, conf, mgmt, cxi).map(Some),
        Command::Del => del(inv, conf, cxi).map(|_| None),
        Command::Check => check(inv, conf).map(|_| None),
        Command::Version => unreachable!(),
    }
}

fn add(
    inv: &Invocation,
    conf: &NetConf,
    mgmt: &dyn ManagementApi,
    cxi: &dyn CxiControl,
) -> Result<String, CniError> {
    let mut guard = StateFile::lock(&conf.state_dir).map_err(io_err)?;
    if guard.state.containers.contains_key(&inv.container_id) {
        return Ok(passthrough(conf));
    }

    let uid = conf
        .runtime_config
        .pod_uid
        .as_deref()
        .or_else(|| inv.cni_arg("K8S_POD_UID"))
        .ok_or_else(|| {
            CniError::new(ErrorCode::InvalidConfig, "no pod binding", "runtimeConfig.podUid or K8S_POD_UID required")
        })?;
    let pod = mgmt
        .pod(uid)
        .map_err(|e| remote("management API", e))?
        .ok_or_else(|| CniError::new(ErrorCode::PodNotFound, "pod not found", uid.to_owned()))?;

    let inode = netns_inode(&inv.netns)?;
    let request = VniRequest::from_annotations(&pod.annotations)
        .map_err(|e| CniError::new(ErrorCode::VniUnavailable, "malformed vni annotation", e.to_string()))?;
    let mut entry = ContainerEntry {
        service_ids: Vec::new(),
        netns_inode: inode,
    };
    if request.is_enabled() {
        if pod.grace_period_seconds > MAX_GRACE_PERIOD {
            return Err(CniError::new(
                ErrorCode::GracePeriodTooLong,
                "termination grace period too long",
                format!("{} s > {MAX_GRACE_PERIOD} s", pod.grace_period_seconds),
            ));
        }
        let owner = OwnerRef::job(&pod.job.namespace, &pod.job.name);
        let crds = mgmt.vni_crds(&owner).map_err(|e| remote("management API", e))?;
        let Some(crd) = crds.first() else {
            return Err(CniError::new(ErrorCode::VniUnavailable, "no VNI bound to job", owner.to_string()));
        };
        let req = CreateServiceRequest {
            member: MemberSpec::netns(inode),
            vnis: vec![crd.crd.vni],
            max_endpoints: None,
        };
        let id = cxi.create_service(&req).map_err(|e| remote("CXI socket", e))?;
        entry.service_ids.push(id);
    }
    guard.state.containers.insert(inv.container_id.clone(), entry);
    guard.save().map_err(io_err)?;
    Ok(passthrough(conf))
}

fn del(inv: &Invocation, conf: &NetConf, cxi: &dyn CxiControl) -> Result<(), CniError> {
    let mut guard = StateFile::lock(&conf.state_dir).map_err(io_err)?;
    let Some(entry) = guard.state.containers.get(&inv.container_id).cloned() else {
        return Ok(());
    };
    let mut remaining = Vec::new();
    let mut last_err = None;
    for id in entry.service_ids {
        let mut attempt = 0;
        loop {
            match cxi.delete_service(id) {
                Ok(_) => break,
                Err(RemoteError::Unreachable(d)) if attempt + 1 < DEL_ATTEMPTS => {
                    attempt += 1;
                    last_err = Some(d);
                    thread::sleep(Duration::from_millis(50 * attempt as u64));
                }
                Err(e) => {
                    remaining.push(id);
                    last_err = Some(e.to_string());
                    break;
                }
            }
        }
    }
    if remaining.is_empty() {
        guard.state.containers.remove(&inv.container_id);
        guard.save().map_err(io_err)?;
        return Ok(());
    }
    // keep what could not be deleted so a repeated DEL can finish the job
    guard.state.containers.get_mut(&inv.container_id).unwrap().service_ids = remaining;
    guard.save().map_err(io_err)?;
    Err(CniError::new(
        ErrorCode::TryAgainLater,
        "CXI socket unreachable",
        last_err.unwrap_or_default(),
    ))
}

fn check(inv: &Invocation, conf: &NetConf) -> Result<(), CniError> {
    let state = StateFile::load(&conf.state_dir).map_err(io_err)?;
    match state.containers.contains_key(&inv.container_id) {
        true => Ok(()),
        false => Err(CniError::new(ErrorCode::NotAdded, "container not added", inv.container_id.clone())),
    }
}
