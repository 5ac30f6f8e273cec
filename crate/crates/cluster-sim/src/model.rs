//! Simulation parameters: topology, job shape and the control-plane delay
//! model that stands in for everything Kubernetes does on its own.

use std::hash::{DefaultHasher, Hash, Hasher};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use slingkube_core::NodeId;

/// Uniform `mean ± spread`, clamped at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub mean: f64,
    pub spread: f64,
}

impl Jitter {
    pub const ZERO: Jitter = Jitter::fixed(0.0);

    pub const fn fixed(mean: f64) -> Self {
        Jitter { mean, spread: 0.0 }
    }

    pub fn at(&self, u: f64) -> f64 {
        (self.mean + self.spread * (2.0 * u - 1.0)).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DelayModel {
    /// Job submission to pod object creation.
    pub pod_create: Jitter,
    /// Sandbox and container start on the node, before CNI ADD.
    pub sandbox_start: Jitter,
    /// Concurrent sandbox starts per node. A node's slots open one after
    /// another, `sandbox_start.mean / sandbox_slots` apart, from its first
    /// pod on, so starts flow at a steady rate instead of in waves.
    pub sandbox_slots: usize,
    /// Cost of one job deletion in the serial garbage collector.
    pub deletion_per_job: f64,
}

impl DelayModel {
    /// Everything instantaneous; for logic tests.
    pub fn zero() -> Self {
        DelayModel {
            pod_create: Jitter::ZERO,
            sandbox_start: Jitter::ZERO,
            sandbox_slots: usize::MAX,
            deletion_per_job: 0.0,
        }
    }
}

impl Default for DelayModel {
    fn default() -> Self {
        DelayModel {
            pod_create: Jitter {
                mean: 0.2,
                spread: 0.05,
            },
            sandbox_start: Jitter {
                mean: 0.8,
                spread: 0.1,
            },
            sandbox_slots: 8,
            deletion_per_job: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    #[default]
    RoundRobin,
    /// Pods of one job go to distinct nodes while nodes remain.
    Spread,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimConfig {
    pub nodes: Vec<NodeId>,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default)]
    pub delays: DelayModel,
    #[serde(default)]
    pub seed: u64,
    /// Virtual-time step when only retries are pending; loop period in
    /// wall mode.
    #[serde(default = "default_tick")]
    pub tick: f64,
    /// Retry delay for failed webhook and CNI calls in wall mode. Virtual
    /// mode retries on the next step.
    #[serde(default = "default_backoff")]
    pub wall_backoff: f64,
    /// Threads for the per-step call fan-out; 0 or 1 runs calls in order.
    /// Ignored without the `parallel` feature.
    #[serde(default = "default_fanout")]
    pub fanout_threads: usize,
}

fn default_fanout() -> usize {
    8
}

fn default_tick() -> f64 {
    0.005
}

fn default_backoff() -> f64 {
    1.0
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            nodes: vec![NodeId::from("n0"), NodeId::from("n1")],
            placement: Placement::default(),
            delays: DelayModel::default(),
            seed: 0,
            tick: default_tick(),
            wall_backoff: default_backoff(),
            fanout_threads: default_fanout(),
        }
    }
}

impl SimConfig {
    /// A uniform draw in [0, 1) fixed by seed, object name and purpose, so
    /// runs that differ only in VNI handling see the same delays.
    pub fn draw(&self, key: &str, salt: u64) -> f64 {
        let mut h = DefaultHasher::new();
        (self.seed, key, salt).hash(&mut h);
        StdRng::seed_from_u64(h.finish()).random()
    }
}

fn default_pods() -> u32 {
    1
}

fn default_run() -> Option<f64> {
    Some(0.05)
}

fn default_grace() -> f64 {
    30.0
}

fn default_stop() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JobSpec {
    #[serde(default = "default_pods")]
    pub pods: u32,
    /// Container run time; `null` runs until the job is deleted.
    #[serde(default = "default_run")]
    pub run_seconds: Option<f64>,
    #[serde(default = "default_grace")]
    pub grace_period_seconds: f64,
    /// How long a container takes to exit after being signalled.
    #[serde(default = "default_stop")]
    pub stop_seconds: f64,
    /// Delete the job this long after it succeeds.
    #[serde(default)]
    pub ttl_seconds_after_finished: Option<f64>,
}

impl Default for JobSpec {
    fn default() -> Self {
        JobSpec {
            pods: default_pods(),
            run_seconds: default_run(),
            grace_period_seconds: default_grace(),
            stop_seconds: default_stop(),
            ttl_seconds_after_finished: None,
        }
    }
}

impl JobSpec {
    /// One short container, removed as soon as it finishes.
    pub fn echo() -> Self {
        JobSpec {
            ttl_seconds_after_finished: Some(0.0),
            ..Default::default()
        }
    }

    /// Containers that run until the job is deleted.
    pub fn long_running(pods: u32) -> Self {
        JobSpec {
            pods,
            run_seconds: None,
            ..Default::default()
        }
    }
}
