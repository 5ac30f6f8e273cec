use std::collections::HashMap;
use std::path::PathBuf;

use serde::Deserialize;
use serde_json::value::RawValue;

use crate::error::{CniError, ErrorCode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Add,
    Del,
    Check,
    Version,
}

impl Command {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ADD" => Some(Command::Add),
            "DEL" => Some(Command::Del),
            "CHECK" => Some(Command::Check),
            "VERSION" => Some(Command::Version),
            _ => None,
        }
    }
}

/// One plugin call: environment plus the raw stdin document.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub command: Command,
    pub container_id: String,
    pub netns: String,
    pub ifname: String,
    pub path: String,
    /// `CNI_ARGS`, `K=V;K=V`.
    pub args: String,
    pub stdin: Vec<u8>,
}

impl Invocation {
    pub fn from_env(env: &HashMap<String, String>, stdin: Vec<u8>) -> Result<Self, CniError> {
        let get = |k: &str| env.get(k).cloned().unwrap_or_default();
        let raw = get("CNI_COMMAND");
        let command = Command::parse(&raw).ok_or_else(|| {
            CniError::new(ErrorCode::InvalidEnvironment, "unknown CNI_COMMAND", raw.clone())
        })?;
        Ok(Self {
            command,
            container_id: get("CNI_CONTAINERID"),
            netns: get("CNI_NETNS"),
            ifname: get("CNI_IFNAME"),
            path: get("CNI_PATH"),
            args: get("CNI_ARGS"),
            stdin,
        })
    }

    pub fn cni_arg(&self, key: &str) -> Option<&str> {
        self.args
            .split(';')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RuntimeConfig {
    pub pod_uid: Option<String>,
}

/// Network configuration from stdin. `prevResult` is kept as raw bytes so it
/// can be echoed exactly.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetConf {
    pub cni_version: String,
    #[serde(default)]
    pub name: String,
    #[serde(rename = "type", default)]
    pub plugin_type: String,
    pub vni_management_api: String,
    /// Per-node CXI management socket, e.g. `http://127.0.0.1:7000/nodes/n0`.
    pub cxi_socket: String,
    pub state_dir: PathBuf,
    #[serde(default)]
    pub runtime_config: RuntimeConfig,
    #[serde(default)]
    pub prev_result: Option<Box<RawValue>>,
}

impl NetConf {
    pub fn parse(bytes: &[u8]) -> Result<Self, CniError> {
        serde_json::from_slice(bytes).map_err(|e| {
            let code = match e.classify() {
                serde_json::error::Category::Data => ErrorCode::InvalidConfig,
                _ => ErrorCode::DecodeFailure,
            };
            CniError::new(code, "invalid network configuration", e.to_string())
        })
    }
}
