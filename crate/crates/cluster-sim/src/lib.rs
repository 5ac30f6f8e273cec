//! A small Kubernetes stand-in for exercising the VNI stack.
//!
//! Jobs, VNI claims, VniCrds and pods live in one [`Cluster`]. Each reconcile
//! step routes annotated parents to the VNI endpoint webhooks, creates and
//! schedules pods, runs the CNI chain when a sandbox comes up and when it is
//! torn down, and enforces grace periods on deletion. Time is either virtual
//! (advanced from deadline to deadline) or the wall clock.

pub mod api;
mod cluster;
pub mod cni;
pub mod env;
mod events;
mod model;
pub mod scenario;
pub mod webhook;

pub use cluster::{
    AdmissionRecord, Cluster, LoopHandle, SimClock, SimError, Stats, Summary, FIRST_NETNS_INODE,
};
pub use events::{Event, ObjectKind};
pub use model::{DelayModel, Jitter, JobSpec, Placement, SimConfig};
