use std::collections::HashMap;

use crate::conf::{Invocation, NetConf};
use crate::error::{CniError, ErrorCode};
use crate::plugin::execute;

/// What the process prints (without the trailing newline) and whether it
/// exits zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub success: bool,
}

impl Outcome {
    fn failed(e: &CniError, version: &str) -> Self {
        Outcome {
            stdout: e.to_json(version),
            success: false,
        }
    }

    pub fn read_failure(e: std::io::Error) -> Self {
        let e = CniError::new(ErrorCode::DecodeFailure, "cannot read stdin", e.to_string());
        Self::failed(&e, "1.0.0")
    }
}

/// Whole-process behaviour for one invocation.
pub fn run(env: &HashMap<String, String>, stdin: Vec<u8>) -> Outcome {
    // error documents echo the caller's cniVersion when it can be read
    let version = NetConf::parse(&stdin)
        .map(|c| c.cni_version)
        .unwrap_or_else(|_| "1.0.0".to_owned());
    match Invocation::from_env(env, stdin).and_then(|inv| execute(&inv)) {
        Ok(out) => Outcome {
            stdout: out.unwrap_or_default(),
            success: true,
        },
        Err(e) => Outcome::failed(&e, &version),
    }
}
