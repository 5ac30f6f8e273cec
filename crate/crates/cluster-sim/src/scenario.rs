//! Timed scripts of submissions and deletions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use slingkube_core::Timestamp;

use crate::env::Environment;
use crate::{JobSpec, ObjectKind, SimError, Summary};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum Action {
    #[serde(rename_all = "camelCase")]
    SubmitJob {
        namespace: String,
        name: String,
        #[serde(default)]
        annotations: BTreeMap<String, String>,
        #[serde(default)]
        spec: JobSpec,
    },
    SubmitClaim { namespace: String, name: String },
    Delete { kind: ObjectKind, namespace: String, name: String },
    /// Take the VNI endpoint down or bring it back.
    Endpoint { up: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timed {
    #[serde(default)]
    pub at: f64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Scenario {
    #[serde(default)]
    pub env: crate::env::EnvConfig,
    pub actions: Vec<Timed>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn default_max_steps() -> usize {
    1_000_000
}

/// Plays the actions in time order, then runs to quiescence.
pub fn play(env: &Environment, actions: &[Timed], max_steps: usize) -> Result<Summary, SimError> {
    let mut actions = actions.to_vec();
    actions.sort_by(|a, b| a.at.total_cmp(&b.at));
    let c = &env.cluster;
    let mut steps = 0;
    for t in actions {
        steps += c.run_until(Timestamp(t.at), max_steps.saturating_sub(steps))?;
        match t.action {
            Action::SubmitJob { namespace, name, annotations, spec } => {
                c.submit_job(&namespace, &name, annotations, spec)?;
            }
            Action::SubmitClaim { namespace, name } => {
                c.submit_claim(&namespace, &name)?;
            }
            Action::Delete { kind, namespace, name } => c.request_delete(kind, &namespace, &name)?,
            Action::Endpoint { up } => env.set_endpoint_up(up),
        }
    }
    let mut summary = c.run_until_quiescent(max_steps.saturating_sub(steps).max(1))?;
    summary.steps += steps;
    Ok(summary)
}
