//! How the node agent runs the CNI chain for a pod sandbox.

use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

use slingkube_core::NodeId;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CniCall {
    pub node: NodeId,
    pub pod_uid: String,
    pub container_id: String,
    pub netns_inode: u64,
}

pub trait CniRuntime: Send + Sync {
    fn add(&self, call: &CniCall) -> Result<(), String>;
    fn del(&self, call: &CniCall) -> Result<(), String>;
}

/// No CXI plugin in the chain.
pub struct NoCni;

impl CniRuntime for NoCni {
    fn add(&self, _: &CniCall) -> Result<(), String> {
        Ok(())
    }

    fn del(&self, _: &CniCall) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub enum PluginExec {
    /// Call the plugin library in this process.
    InProcess,
    /// Spawn the plugin binary per call, as a container runtime would.
    Binary(PathBuf),
}

/// Runs the CXI plugin after a stand-in interface plugin whose result it
/// must pass through unchanged.
pub struct PluginRuntime {
    pub mgmt_url: String,
    /// CXI simulator base URL; the node path is appended per call.
    pub cxi_url: String,
    /// Per-node state directories live below this.
    pub state_root: PathBuf,
    pub exec: PluginExec,
}

impl PluginRuntime {
    /// What the interface plugin before us would have reported.
    pub fn prev_result(call: &CniCall) -> String {
        let n = call.netns_inode;
        format!(
            r#"{{"cniVersion":"1.0.0","interfaces":[{{"name":"eth0","sandbox":"sim-netns:{n}"}}],"ips":[{{"address":"10.{}.{}.{}/8","interface":0}}]}}"#,
            (n >> 16) & 0xff,
            (n >> 8) & 0xff,
            n & 0xff
        )
    }

    fn stdin(&self, call: &CniCall, prev: &str) -> String {
        let state_dir = self.state_root.join(call.node.as_str());
        let plugin = serde_json::json!({
            "cniVersion": "1.0.0",
            "name": "slingshot",
            "type": "cxi-cni",
            "vniManagementApi": self.mgmt_url,
            "cxiSocket": format!("{}/nodes/{}", self.cxi_url.trim_end_matches('/'), call.node),
            "stateDir": state_dir,
            "runtimeConfig": {"podUid": call.pod_uid},
        });
        let head = plugin.to_string();
        // splice prevResult in as raw text so its bytes reach the plugin as-is
        format!("{},\"prevResult\":{prev}}}", &head[..head.len() - 1])
    }

    fn invoke(&self, command: &str, call: &CniCall, prev: &str) -> Result<String, String> {
        let env: HashMap<String, String> = [
            ("CNI_COMMAND", command.to_owned()),
            ("CNI_CONTAINERID", call.container_id.clone()),
            ("CNI_NETNS", format!("sim-netns:{}", call.netns_inode)),
            ("CNI_IFNAME", "eth0".to_owned()),
            ("CNI_PATH", "/opt/cni/bin".to_owned()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();
        let stdin = self.stdin(call, prev);
        match &self.exec {
            PluginExec::InProcess => {
                let out = slingkube_cni::run(&env, stdin.into_bytes());
                match out.success {
                    true => Ok(out.stdout),
                    false => Err(out.stdout),
                }
            }
            PluginExec::Binary(path) => {
                let mut child = Command::new(path)
                    .env_clear()
                    .envs(&env)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .spawn()
                    .map_err(|e| format!("spawn {}: {e}", path.display()))?;
                child
                    .stdin
                    .take()
                    .expect("piped stdin")
                    .write_all(stdin.as_bytes())
                    .map_err(|e| e.to_string())?;
                let out = child.wait_with_output().map_err(|e| e.to_string())?;
                let text = String::from_utf8_lossy(&out.stdout).trim_end().to_owned();
                match out.status.success() {
                    true => Ok(text),
                    false => Err(text),
                }
            }
        }
    }
}

impl CniRuntime for PluginRuntime {
    fn add(&self, call: &CniCall) -> Result<(), String> {
        let prev = Self::prev_result(call);
        let out = self.invoke("ADD", call, &prev)?;
        if out != prev {
            return Err(format!("chained result altered: {out}"));
        }
        Ok(())
    }

    fn del(&self, call: &CniCall) -> Result<(), String> {
        self.invoke("DEL", call, &Self::prev_result(call)).map(|_| ())
    }
}
