use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::Receiver;
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use slingkube_core::api::mgmt::{JobView, ObjectRef, Phase, PodView, VniCrdView};
use slingkube_core::api::webhook::{
    FinalizeResponse, ObjectMeta, ParentKind, ParentObject, SyncRequest, SyncResponse, VniCrd,
    VniRequest, VNI_ANNOTATION,
};
use slingkube_core::{Clock, NodeId, OwnerRef, Timestamp, VirtualClock, WallClock};

use crate::cni::{CniCall, CniRuntime};
use crate::events::{Event, EventSink, ObjectKind};
use crate::model::{JobSpec, Placement, SimConfig};
use crate::webhook::VniWebhook;

/// First network namespace inode handed out.
pub const FIRST_NETNS_INODE: u64 = 4026532000;

#[derive(Clone)]
pub enum SimClock {
    Virtual(Arc<VirtualClock>),
    Wall(Arc<WallClock>),
}

impl SimClock {
    pub fn virtual_at_zero() -> Self {
        SimClock::Virtual(Arc::new(VirtualClock::new(Timestamp::ZERO)))
    }

    pub fn wall() -> Self {
        SimClock::Wall(Arc::new(WallClock::new()))
    }

    pub fn now(&self) -> Timestamp {
        match self {
            SimClock::Virtual(c) => c.now(),
            SimClock::Wall(c) => c.now(),
        }
    }

    pub fn as_clock(&self) -> Arc<dyn Clock> {
        match self {
            SimClock::Virtual(c) => c.clone(),
            SimClock::Wall(c) => c.clone(),
        }
    }

    pub fn is_virtual(&self) -> bool {
        matches!(self, SimClock::Virtual(_))
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SimError {
    #[error("{kind:?} {namespace}/{name} already exists")]
    Duplicate {
        kind: ObjectKind,
        namespace: String,
        name: String,
    },
    #[error("{kind:?} {namespace}/{name} not found")]
    NotFound {
        kind: ObjectKind,
        namespace: String,
        name: String,
    },
    #[error("work remains after {0} steps")]
    NonQuiescent(usize),
}

/// Per-job timing. Admission delay is `started_at - submitted_at`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissionRecord {
    pub job_ref: String,
    pub submitted_at: f64,
    pub started_at: Option<f64>,
    pub completed_at: Option<f64>,
    pub deleted_at: Option<f64>,
}

impl AdmissionRecord {
    pub fn admission_delay(&self) -> Option<f64> {
        self.started_at.map(|s| s - self.submitted_at)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Stats {
    pub steps: u64,
    pub sync_calls: u64,
    pub finalize_calls: u64,
    pub webhook_failures: u64,
    pub cni_adds: u64,
    pub cni_dels: u64,
    pub cni_failures: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    pub now: f64,
    pub steps: usize,
    pub jobs_live: usize,
    pub jobs_succeeded: u64,
    pub jobs_deleted: u64,
    pub pods_pending: usize,
    pub pods_running: usize,
    pub claims_live: usize,
    pub vni_crds: usize,
}

type Key = (String, String);

fn key(ns: &str, name: &str) -> Key {
    (ns.to_owned(), name.to_owned())
}

#[derive(Clone, Copy, Debug)]
struct Retry {
    pending: bool,
    next_attempt: Timestamp,
}

impl Retry {
    fn now(now: Timestamp) -> Self {
        Retry {
            pending: true,
            next_attempt: now,
        }
    }

    fn idle() -> Self {
        Retry {
            pending: false,
            next_attempt: Timestamp::ZERO,
        }
    }

    fn due(&self) -> Option<Timestamp> {
        self.pending.then_some(self.next_attempt)
    }
}

struct Job {
    uid: String,
    namespace: String,
    name: String,
    annotations: BTreeMap<String, String>,
    spec: JobSpec,
    /// Carries the annotation, so the controller calls the webhooks.
    routed: bool,
    /// Pods must wait for a VniCrd.
    gated: bool,
    phase: Phase,
    deletion_requested: bool,
    record: AdmissionRecord,
    pods: BTreeSet<String>,
    create_pods_at: Option<Timestamp>,
    succeeded_pods: u32,
    crd: Option<String>,
    status: BTreeMap<String, Value>,
    sync: Retry,
    finalize: Retry,
    gc_at: Option<Timestamp>,
}

struct Claim {
    uid: String,
    namespace: String,
    name: String,
    phase: Phase,
    deletion_requested: bool,
    crd: Option<String>,
    status: BTreeMap<String, Value>,
    sync: Retry,
    finalize: Retry,
}

struct Pod {
    uid: String,
    namespace: String,
    name: String,
    job: Key,
    phase: Phase,
    node: Option<NodeId>,
    netns_inode: Option<u64>,
    container_id: Option<String>,
    grace: f64,
    stop: f64,
    run: Option<f64>,
    ready_at: Option<Timestamp>,
    cni_added: bool,
    finish_at: Option<Timestamp>,
    terminate_at: Option<Timestamp>,
    next_attempt: Timestamp,
    last_error: Option<String>,
}

impl Pod {
    fn call(&self) -> CniCall {
        CniCall {
            node: self.node.clone().expect("scheduled pod"),
            pod_uid: self.uid.clone(),
            container_id: self.container_id.clone().expect("scheduled pod"),
            netns_inode: self.netns_inode.expect("scheduled pod"),
        }
    }
}

struct Crd {
    owner: OwnerRef,
    parent: ParentRef,
    crd: VniCrd,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct ParentRef {
    kind: ParentKind,
    key: Key,
}

enum Work {
    Sync(ParentRef, SyncRequest),
    Finalize(ParentRef, SyncRequest),
    Add(String, CniCall),
    Del(String, CniCall),
}

enum Done {
    Sync(Result<SyncResponse, String>),
    Finalize(Result<FinalizeResponse, String>),
    Cni(Result<(), String>),
}

struct State {
    jobs: BTreeMap<Key, Job>,
    claims: BTreeMap<Key, Claim>,
    pods: BTreeMap<String, Pod>,
    crds: BTreeMap<Key, Crd>,
    records: Vec<AdmissionRecord>,
    next_uid: u64,
    next_inode: u64,
    rr: usize,
    /// Per node: when its first pod was scheduled, and when each slot frees.
    slots: BTreeMap<NodeId, (Timestamp, Vec<Timestamp>)>,
    gc_free_at: Timestamp,
    jobs_succeeded: u64,
    jobs_deleted: u64,
    stats: Stats,
    events: EventSink,
}

/// Simulated control plane plus node agents.
///
/// One reconcile step plans under the state lock, performs webhook and CNI
/// calls with the lock released, then applies the results under the lock.
pub struct Cluster {
    config: SimConfig,
    clock: SimClock,
    webhook: Arc<dyn VniWebhook>,
    cni: Arc<dyn CniRuntime>,
    state: Mutex<State>,
    step_lock: Mutex<()>,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Cluster {
    pub fn new(
        config: SimConfig,
        clock: SimClock,
        webhook: Arc<dyn VniWebhook>,
        cni: Arc<dyn CniRuntime>,
    ) -> Arc<Self> {
        let state = State {
            jobs: BTreeMap::new(),
            claims: BTreeMap::new(),
            pods: BTreeMap::new(),
            crds: BTreeMap::new(),
            records: Vec::new(),
            next_uid: 1,
            next_inode: FIRST_NETNS_INODE,
            rr: 0,
            slots: BTreeMap::new(),
            gc_free_at: Timestamp::ZERO,
            jobs_succeeded: 0,
            jobs_deleted: 0,
            stats: Stats::default(),
            events: EventSink::default(),
        };
        Arc::new(Cluster {
            #[cfg(feature = "parallel")]
            pool: (config.fanout_threads > 1).then(|| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.fanout_threads)
                    .thread_name(|i| format!("fanout-{i}"))
                    .build()
                    .expect("fan-out pool")
            }),
            config,
            clock,
            webhook,
            cni,
            state: Mutex::new(state),
            step_lock: Mutex::new(()),
        })
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().expect("cluster state poisoned")
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    fn backoff(&self) -> f64 {
        match self.clock.is_virtual() {
            true => 0.0,
            false => self.config.wall_backoff,
        }
    }

    pub fn subscribe(&self) -> Receiver<Event> {
        self.lock().events.subscribe()
    }

    pub fn set_event_log(&self, w: Box<dyn Write + Send>) {
        self.lock().events.set_log(w);
    }

    pub fn flush_event_log(&self) {
        self.lock().events.flush();
    }

    pub fn submit_job(
        &self,
        namespace: &str,
        name: &str,
        annotations: BTreeMap<String, String>,
        spec: JobSpec,
    ) -> Result<String, SimError> {
        let now = self.now();
        let mut st = self.lock();
        let k = key(namespace, name);
        if st.jobs.contains_key(&k) {
            return Err(SimError::Duplicate {
                kind: ObjectKind::Job,
                namespace: namespace.into(),
                name: name.into(),
            });
        }
        let uid = st.uid("job");
        let routed = annotations.contains_key(VNI_ANNOTATION);
        let gated = VniRequest::from_annotations(&annotations)
            .map(|r| r.is_enabled())
            .unwrap_or(true);
        let create_in = self
            .config
            .delays
            .pod_create
            .at(self.config.draw(&format!("{namespace}/{name}"), 1));
        let job = Job {
            uid: uid.clone(),
            namespace: namespace.into(),
            name: name.into(),
            annotations,
            spec,
            routed,
            gated,
            phase: Phase::Pending,
            deletion_requested: false,
            record: AdmissionRecord {
                job_ref: OwnerRef::job(namespace, name).to_string(),
                submitted_at: now.0,
                started_at: None,
                completed_at: None,
                deleted_at: None,
            },
            pods: BTreeSet::new(),
            create_pods_at: Some(now.plus(create_in)),
            succeeded_pods: 0,
            crd: None,
            status: BTreeMap::new(),
            sync: if routed { Retry::now(now) } else { Retry::idle() },
            finalize: Retry::idle(),
            gc_at: None,
        };
        st.emit(now, ObjectKind::Job, namespace, name, &uid, Phase::Pending, None, None);
        st.jobs.insert(k, job);
        Ok(uid)
    }

    pub fn submit_claim(&self, namespace: &str, name: &str) -> Result<String, SimError> {
        let now = self.now();
        let mut st = self.lock();
        let k = key(namespace, name);
        if st.claims.contains_key(&k) {
            return Err(SimError::Duplicate {
                kind: ObjectKind::VniClaim,
                namespace: namespace.into(),
                name: name.into(),
            });
        }
        let uid = st.uid("claim");
        st.emit(now, ObjectKind::VniClaim, namespace, name, &uid, Phase::Pending, None, None);
        st.claims.insert(
            k,
            Claim {
                uid: uid.clone(),
                namespace: namespace.into(),
                name: name.into(),
                phase: Phase::Pending,
                deletion_requested: false,
                crd: None,
                status: BTreeMap::new(),
                sync: Retry::now(now),
                finalize: Retry::idle(),
            },
        );
        Ok(uid)
    }

    /// Deletes a job (pods are signalled, the VNI is released once they are
    /// gone), a claim (stalls while users remain) or a VniCrd out of band
    /// (the parent re-syncs).
    pub fn request_delete(&self, kind: ObjectKind, namespace: &str, name: &str) -> Result<(), SimError> {
        let now = self.now();
        let mut st = self.lock();
        let k = key(namespace, name);
        let not_found = || SimError::NotFound {
            kind,
            namespace: namespace.into(),
            name: name.into(),
        };
        match kind {
            ObjectKind::Job => {
                if !st.jobs.contains_key(&k) {
                    return Err(not_found());
                }
                st.delete_job(&k, now);
            }
            ObjectKind::VniClaim => {
                let claim = st.claims.get_mut(&k).ok_or_else(not_found)?;
                if !claim.deletion_requested {
                    claim.deletion_requested = true;
                    claim.phase = Phase::Terminating;
                    claim.finalize = Retry::now(now);
                    let uid = claim.uid.clone();
                    st.emit(now, ObjectKind::VniClaim, namespace, name, &uid, Phase::Terminating, None, None);
                }
            }
            ObjectKind::VniCrd => {
                let crd = st.crds.get(&k).ok_or_else(not_found)?;
                let parent = crd.parent.clone();
                st.remove_crd(&k, now);
                if let Some(retry) = st.parent_sync(&parent) {
                    *retry = Retry::now(now);
                }
            }
            ObjectKind::Pod => return Err(not_found()),
        }
        Ok(())
    }

    /// One pass of controller, scheduler and node agents. Returns the number
    /// of phase transitions it caused.
    pub fn reconcile_step(&self) -> usize {
        let _serial = self.step_lock.lock().expect("step lock poisoned");
        let now = self.now();
        let (before, work) = {
            let mut st = self.lock();
            let before = st.events.count;
            (before, st.plan(now, &self.config))
        };
        let done = self.execute(&work);
        let now = self.now();
        let mut st = self.lock();
        st.apply(now, self.backoff(), &self.config, work, done);
        st.stats.steps += 1;
        (st.events.count - before) as usize
    }

    #[cfg(feature = "parallel")]
    fn execute(&self, work: &[Work]) -> Vec<Done> {
        use rayon::prelude::*;
        match &self.pool {
            Some(pool) if work.len() > 1 => pool.install(|| work.par_iter().map(|w| self.call(w)).collect()),
            _ => work.iter().map(|w| self.call(w)).collect(),
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn execute(&self, work: &[Work]) -> Vec<Done> {
        work.iter().map(|w| self.call(w)).collect()
    }

    fn call(&self, w: &Work) -> Done {
        match w {
            Work::Sync(_, req) => Done::Sync(self.webhook.sync(req)),
            Work::Finalize(_, req) => Done::Finalize(self.webhook.finalize(req)),
            Work::Add(_, call) => Done::Cni(self.cni.add(call)),
            Work::Del(_, call) => Done::Cni(self.cni.del(call)),
        }
    }

    /// Earliest time at which a step has something to do; `None` when the
    /// cluster is quiescent.
    pub fn next_deadline(&self) -> Option<Timestamp> {
        self.lock().next_deadline()
    }

    /// Steps (advancing virtual time between steps) until nothing is left to
    /// do.
    pub fn run_until_quiescent(&self, max_steps: usize) -> Result<Summary, SimError> {
        let mut steps = 0;
        loop {
            self.reconcile_step();
            steps += 1;
            let Some(next) = self.next_deadline() else {
                return Ok(self.summary(steps));
            };
            if steps >= max_steps {
                return Err(SimError::NonQuiescent(max_steps));
            }
            self.wait_until(next);
        }
    }

    /// Steps through every deadline up to `t`, then moves the clock to `t`.
    /// Returns the number of steps taken.
    pub fn run_until(&self, t: Timestamp, max_steps: usize) -> Result<usize, SimError> {
        let mut steps = 0;
        while let Some(d) = self.next_deadline().filter(|d| *d <= t) {
            if steps >= max_steps {
                return Err(SimError::NonQuiescent(max_steps));
            }
            if d > self.now() {
                self.wait_until(d);
            }
            self.reconcile_step();
            steps += 1;
            if let Some(d) = self.next_deadline().filter(|d| *d <= self.now()) {
                self.wait_until(d);
            }
        }
        while self.now() < t {
            self.wait_until(t);
        }
        Ok(steps)
    }

    fn wait_until(&self, next: Timestamp) {
        let now = self.now();
        match &self.clock {
            SimClock::Virtual(c) => {
                if next > now {
                    c.advance_to(next);
                } else {
                    c.advance(self.config.tick);
                }
            }
            SimClock::Wall(_) => {
                let wait = next.since(now).clamp(0.0005, self.config.tick);
                thread::sleep(Duration::from_secs_f64(wait));
            }
        }
    }

    /// Runs the reconcile loop on a background thread until the handle is
    /// stopped. Meant for wall-clock mode.
    pub fn spawn_loop(self: &Arc<Self>) -> LoopHandle {
        let stop = Arc::new(AtomicBool::new(false));
        let (cluster, flag) = (self.clone(), stop.clone());
        let thread = thread::Builder::new()
            .name("reconcile".into())
            .spawn(move || {
                while !flag.load(Ordering::Relaxed) {
                    cluster.reconcile_step();
                    let next = cluster.next_deadline().unwrap_or(cluster.now().plus(cluster.config.tick));
                    cluster.wait_until(next);
                }
            })
            .expect("spawn reconcile loop");
        LoopHandle {
            stop,
            thread: Some(thread),
        }
    }

    pub fn summary(&self, steps: usize) -> Summary {
        let st = self.lock();
        let count = |p: Phase| st.pods.values().filter(|x| x.phase == p).count();
        Summary {
            now: self.now().0,
            steps,
            jobs_live: st.jobs.len(),
            jobs_succeeded: st.jobs_succeeded,
            jobs_deleted: st.jobs_deleted,
            pods_pending: count(Phase::Pending),
            pods_running: count(Phase::Running),
            claims_live: st.claims.len(),
            vni_crds: st.crds.len(),
        }
    }

    pub fn stats(&self) -> Stats {
        self.lock().stats.clone()
    }

    /// Records of deleted jobs followed by live ones, in submission order.
    pub fn records(&self) -> Vec<AdmissionRecord> {
        let st = self.lock();
        let mut out: Vec<_> = st
            .records
            .iter()
            .cloned()
            .chain(st.jobs.values().map(|j| j.record.clone()))
            .collect();
        out.sort_by(|a, b| a.submitted_at.total_cmp(&b.submitted_at).then(a.job_ref.cmp(&b.job_ref)));
        out
    }

    pub fn pod_view(&self, uid: &str) -> Option<PodView> {
        let st = self.lock();
        st.pods.get(uid).map(|p| st.pod_view(p))
    }

    pub fn pods_of_job(&self, namespace: &str, name: &str) -> Vec<PodView> {
        let st = self.lock();
        let Some(job) = st.jobs.get(&key(namespace, name)) else {
            return Vec::new();
        };
        job.pods.iter().filter_map(|u| st.pods.get(u)).map(|p| st.pod_view(p)).collect()
    }

    pub fn job_view(&self, namespace: &str, name: &str) -> Option<JobView> {
        let st = self.lock();
        let job = st.jobs.get(&key(namespace, name))?;
        Some(JobView {
            uid: job.uid.clone(),
            namespace: job.namespace.clone(),
            name: job.name.clone(),
            phase: job.phase,
            annotations: job.annotations.clone(),
            pods: job.pods.iter().cloned().collect(),
            vni_crd: st.crd_of(&job.namespace, job.crd.as_deref()).cloned(),
            status: job.status.clone(),
        })
    }

    pub fn claim_phase(&self, namespace: &str, name: &str) -> Option<Phase> {
        self.lock().claims.get(&key(namespace, name)).map(|c| c.phase)
    }

    pub fn claim_crd(&self, namespace: &str, name: &str) -> Option<VniCrd> {
        let st = self.lock();
        let claim = st.claims.get(&key(namespace, name))?;
        st.crd_of(namespace, claim.crd.as_deref()).cloned()
    }

    /// VniCrds, optionally only those owned by `owner`.
    pub fn vni_crds(&self, owner: Option<&str>) -> Vec<VniCrdView> {
        self.lock()
            .crds
            .values()
            .filter(|c| owner.is_none_or(|o| c.owner.as_str() == o))
            .map(|c| VniCrdView {
                owner: c.owner.clone(),
                crd: c.crd.clone(),
            })
            .collect()
    }
}

pub struct LoopHandle {
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl LoopHandle {
    pub fn stop(mut self) {
        self.halt();
    }

    fn halt(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for LoopHandle {
    fn drop(&mut self) {
        self.halt();
    }
}

fn min_ts(a: Option<Timestamp>, b: Option<Timestamp>) -> Option<Timestamp> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y < x { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

impl State {
    fn uid(&mut self, prefix: &str) -> String {
        let n = self.next_uid;
        self.next_uid += 1;
        format!("{prefix}-{n:08}")
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        &mut self,
        t: Timestamp,
        kind: ObjectKind,
        namespace: &str,
        name: &str,
        uid: &str,
        phase: Phase,
        node: Option<NodeId>,
        detail: Option<String>,
    ) {
        self.events.emit(Event {
            t: t.0,
            kind,
            namespace: namespace.into(),
            name: name.into(),
            uid: uid.into(),
            phase,
            node,
            detail,
        });
    }

    fn crd_of(&self, namespace: &str, name: Option<&str>) -> Option<&VniCrd> {
        name.and_then(|n| self.crds.get(&key(namespace, n))).map(|c| &c.crd)
    }

    fn pod_view(&self, p: &Pod) -> PodView {
        let job = self.jobs.get(&p.job);
        PodView {
            uid: p.uid.clone(),
            namespace: p.namespace.clone(),
            name: p.name.clone(),
            phase: p.phase,
            node: p.node.clone(),
            netns_inode: p.netns_inode,
            container_id: p.container_id.clone(),
            grace_period_seconds: p.grace,
            job: ObjectRef {
                namespace: p.job.0.clone(),
                name: p.job.1.clone(),
            },
            annotations: job.map(|j| j.annotations.clone()).unwrap_or_default(),
            vni: job.and_then(|j| self.crd_of(&j.namespace, j.crd.as_deref())).map(|c| c.vni),
        }
    }

    fn parent_sync(&mut self, p: &ParentRef) -> Option<&mut Retry> {
        match p.kind {
            ParentKind::Job => self.jobs.get_mut(&p.key).map(|j| &mut j.sync),
            ParentKind::VniClaim => self.claims.get_mut(&p.key).map(|c| &mut c.sync),
        }
    }

    fn request(&self, p: &ParentRef) -> Option<SyncRequest> {
        let (mut parent, deleting) = match p.kind {
            ParentKind::Job => {
                let j = self.jobs.get(&p.key)?;
                (
                    ParentObject::job(&j.namespace, &j.name, j.annotations.clone()),
                    j.deletion_requested,
                )
            }
            ParentKind::VniClaim => {
                let c = self.claims.get(&p.key)?;
                (ParentObject::claim(&c.namespace, &c.name), c.deletion_requested)
            }
        };
        parent.metadata = ObjectMeta {
            deletion_requested: deleting,
            ..parent.metadata
        };
        let children = self
            .crds
            .values()
            .filter(|c| c.parent == *p)
            .map(|c| c.crd.clone())
            .collect();
        Some(SyncRequest { parent, children })
    }

    fn remove_crd(&mut self, k: &Key, now: Timestamp) {
        if let Some(c) = self.crds.remove(k) {
            match c.parent.kind {
                ParentKind::Job => {
                    if let Some(j) = self.jobs.get_mut(&c.parent.key) {
                        j.crd = None;
                    }
                }
                ParentKind::VniClaim => {
                    if let Some(cl) = self.claims.get_mut(&c.parent.key) {
                        cl.crd = None;
                    }
                }
            }
            self.emit(now, ObjectKind::VniCrd, &k.0, &k.1, &c.crd.name, Phase::Deleted, None, None);
        }
    }

    /// Makes the parent's children match `desired`.
    fn apply_children(&mut self, p: &ParentRef, desired: Vec<VniCrd>, now: Timestamp) {
        let owner = match p.kind {
            ParentKind::Job => OwnerRef::job(&p.key.0, &p.key.1),
            ParentKind::VniClaim => OwnerRef::claim(&p.key.0, &p.key.1),
        };
        let wanted: BTreeSet<Key> = desired.iter().map(|c| key(&c.namespace, &c.name)).collect();
        let stale: Vec<Key> = self
            .crds
            .iter()
            .filter(|(k, c)| c.parent == *p && !wanted.contains(*k))
            .map(|(k, _)| k.clone())
            .collect();
        for k in stale {
            self.remove_crd(&k, now);
        }
        let first = desired.first().map(|c| c.name.clone());
        for crd in desired {
            let k = key(&crd.namespace, &crd.name);
            let changed = self.crds.get(&k).is_none_or(|c| c.crd != crd);
            if changed {
                self.emit(now, ObjectKind::VniCrd, &k.0, &k.1, &crd.name, Phase::Running, None, Some(format!("vni {}", crd.vni)));
                self.crds.insert(
                    k,
                    Crd {
                        owner: owner.clone(),
                        parent: p.clone(),
                        crd,
                    },
                );
            }
        }
        match p.kind {
            ParentKind::Job => {
                if let Some(j) = self.jobs.get_mut(&p.key) {
                    j.crd = first;
                }
            }
            ParentKind::VniClaim => {
                if let Some(c) = self.claims.get_mut(&p.key) {
                    c.crd = first;
                    if c.crd.is_some() && c.phase == Phase::Pending {
                        c.phase = Phase::Running;
                        let uid = c.uid.clone();
                        self.emit(now, ObjectKind::VniClaim, &p.key.0, &p.key.1, &uid, Phase::Running, None, None);
                    }
                }
            }
        }
    }

    fn delete_job(&mut self, k: &Key, now: Timestamp) {
        let Some(job) = self.jobs.get_mut(k) else { return };
        if job.deletion_requested {
            return;
        }
        job.deletion_requested = true;
        job.create_pods_at = None;
        job.gc_at = None;
        job.phase = Phase::Terminating;
        let uid = job.uid.clone();
        let pods: Vec<String> = job.pods.iter().cloned().collect();
        self.emit(now, ObjectKind::Job, &k.0, &k.1, &uid, Phase::Terminating, None, None);
        for pu in pods {
            let Some(pod) = self.pods.get_mut(&pu) else { continue };
            match (pod.phase, pod.node.is_some()) {
                (Phase::Succeeded, _) | (Phase::Pending, false) => self.remove_pod(&pu, now),
                (Phase::Running, _) => {
                    let mut at = now.plus(pod.stop.min(pod.grace));
                    if let Some(f) = pod.finish_at {
                        at = Timestamp(at.0.min(f.0.max(now.0)));
                    }
                    pod.terminate_at = Some(at);
                    pod.phase = Phase::Terminating;
                    let (ns, name, node) = (pod.namespace.clone(), pod.name.clone(), pod.node.clone());
                    self.emit(now, ObjectKind::Pod, &ns, &name, &pu, Phase::Terminating, node, None);
                }
                (Phase::Pending, true) => {
                    // sandbox may be half set up; DEL tolerates unknown containers
                    pod.terminate_at = Some(now);
                    pod.phase = Phase::Terminating;
                    let (ns, name, node) = (pod.namespace.clone(), pod.name.clone(), pod.node.clone());
                    self.emit(now, ObjectKind::Pod, &ns, &name, &pu, Phase::Terminating, node, None);
                }
                _ => {}
            }
        }
        self.check_job_gone(k, now);
    }

    fn remove_pod(&mut self, uid: &str, now: Timestamp) {
        let Some(pod) = self.pods.remove(uid) else { return };
        self.emit(now, ObjectKind::Pod, &pod.namespace, &pod.name, uid, Phase::Deleted, pod.node.clone(), None);
        if let Some(job) = self.jobs.get_mut(&pod.job) {
            job.pods.remove(uid);
        }
        self.check_job_gone(&pod.job, now);
    }

    fn check_job_gone(&mut self, k: &Key, now: Timestamp) {
        let Some(job) = self.jobs.get_mut(k) else { return };
        if !job.deletion_requested || !job.pods.is_empty() {
            return;
        }
        if job.routed {
            if !job.finalize.pending {
                job.finalize = Retry::now(now);
            }
        } else {
            self.finish_job(k, now);
        }
    }

    fn finish_job(&mut self, k: &Key, now: Timestamp) {
        let Some(mut job) = self.jobs.remove(k) else { return };
        job.record.deleted_at = Some(now.0);
        self.records.push(job.record);
        self.jobs_deleted += 1;
        self.emit(now, ObjectKind::Job, &k.0, &k.1, &job.uid, Phase::Deleted, None, None);
        let owned: Vec<Key> = self
            .crds
            .iter()
            .filter(|(_, c)| c.parent.kind == ParentKind::Job && c.parent.key == *k)
            .map(|(k, _)| k.clone())
            .collect();
        for c in owned {
            self.remove_crd(&c, now);
        }
    }

    fn finish_claim(&mut self, k: &Key, now: Timestamp) {
        let Some(claim) = self.claims.remove(k) else { return };
        self.emit(now, ObjectKind::VniClaim, &k.0, &k.1, &claim.uid, Phase::Deleted, None, None);
        let owned: Vec<Key> = self
            .crds
            .iter()
            .filter(|(_, c)| c.parent.kind == ParentKind::VniClaim && c.parent.key == *k)
            .map(|(k, _)| k.clone())
            .collect();
        for c in owned {
            self.remove_crd(&c, now);
        }
    }

    fn create_pods(&mut self, k: &Key, now: Timestamp) {
        let job = &self.jobs[k];
        let (count, grace, stop, run) = (
            job.spec.pods,
            job.spec.grace_period_seconds,
            job.spec.stop_seconds,
            job.spec.run_seconds,
        );
        for i in 0..count {
            let uid = self.uid("pod");
            let name = format!("{}-{i}", k.1);
            self.emit(now, ObjectKind::Pod, &k.0, &name, &uid, Phase::Pending, None, None);
            self.pods.insert(
                uid.clone(),
                Pod {
                    uid: uid.clone(),
                    namespace: k.0.clone(),
                    name,
                    job: k.clone(),
                    phase: Phase::Pending,
                    node: None,
                    netns_inode: None,
                    container_id: None,
                    grace,
                    stop,
                    run,
                    ready_at: None,
                    cni_added: false,
                    finish_at: None,
                    terminate_at: None,
                    next_attempt: now,
                    last_error: None,
                },
            );
            self.jobs.get_mut(k).unwrap().pods.insert(uid);
        }
        self.jobs.get_mut(k).unwrap().create_pods_at = None;
    }

    fn pick_node(&mut self, cfg: &SimConfig, job: &Key) -> NodeId {
        let n = cfg.nodes.len();
        let start = self.rr;
        self.rr = self.rr.wrapping_add(1);
        match cfg.placement {
            Placement::RoundRobin => cfg.nodes[start % n].clone(),
            Placement::Spread => {
                let used = |node: &NodeId| {
                    self.pods
                        .values()
                        .filter(|p| p.job == *job && p.node.as_ref() == Some(node))
                        .count()
                };
                (0..n)
                    .map(|i| &cfg.nodes[(start + i) % n])
                    .min_by_key(|node| used(node))
                    .expect("at least one node")
                    .clone()
            }
        }
    }

    fn schedule(&mut self, uid: &str, now: Timestamp, cfg: &SimConfig) {
        let job = self.pods[uid].job.clone();
        let node = self.pick_node(cfg, &job);
        let inode = self.next_inode;
        self.next_inode += 1;
        let pod = &self.pods[uid];
        let dur = cfg
            .delays
            .sandbox_start
            .at(cfg.draw(&format!("{}/{}", pod.namespace, pod.name), 2));
        let (anchor, slots) = self.slots.entry(node.clone()).or_insert((now, Vec::new()));
        let ready = if slots.len() < cfg.delays.sandbox_slots {
            let stagger = cfg.delays.sandbox_start.mean / cfg.delays.sandbox_slots as f64;
            let r = anchor.plus(stagger * slots.len() as f64).max(now).plus(dur);
            slots.push(r);
            r
        } else {
            let (i, free) = slots
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.0.total_cmp(&b.1.0))
                .map(|(i, t)| (i, *t))
                .expect("slots non-empty");
            let r = free.max(now).plus(dur);
            slots[i] = r;
            r
        };
        let pod = self.pods.get_mut(uid).unwrap();
        pod.node = Some(node);
        pod.netns_inode = Some(inode);
        pod.container_id = Some(format!("ctr-{uid}"));
        pod.ready_at = Some(ready);
    }

    fn plan(&mut self, now: Timestamp, cfg: &SimConfig) -> Vec<Work> {
        let gc: Vec<Key> = self
            .jobs
            .iter()
            .filter(|(_, j)| j.gc_at.is_some_and(|t| t <= now))
            .map(|(k, _)| k.clone())
            .collect();
        for k in gc {
            self.delete_job(&k, now);
        }

        let create: Vec<Key> = self
            .jobs
            .iter()
            .filter(|(_, j)| j.create_pods_at.is_some_and(|t| t <= now))
            .map(|(k, _)| k.clone())
            .collect();
        for k in create {
            self.create_pods(&k, now);
        }

        let schedulable: Vec<String> = self
            .pods
            .values()
            .filter(|p| p.phase == Phase::Pending && p.node.is_none())
            .filter(|p| self.jobs.get(&p.job).is_some_and(|j| !j.gated || j.crd.is_some()))
            .map(|p| p.uid.clone())
            .collect();
        for uid in schedulable {
            self.schedule(&uid, now, cfg);
        }

        let mut work = Vec::new();
        for p in self.pods.values() {
            if p.next_attempt > now {
                continue;
            }
            let due = |t: Option<Timestamp>| t.is_some_and(|t| t <= now);
            match p.phase {
                Phase::Pending if p.node.is_some() && !p.cni_added && due(p.ready_at) => {
                    work.push(Work::Add(p.uid.clone(), p.call()))
                }
                Phase::Running if due(p.finish_at) => work.push(Work::Del(p.uid.clone(), p.call())),
                Phase::Terminating if due(p.terminate_at) => work.push(Work::Del(p.uid.clone(), p.call())),
                _ => {}
            }
        }

        let mut parents = Vec::new();
        for (k, j) in &self.jobs {
            let p = ParentRef {
                kind: ParentKind::Job,
                key: k.clone(),
            };
            if j.deletion_requested {
                if j.finalize.due().is_some_and(|t| t <= now) {
                    parents.push((p, true));
                }
            } else if j.sync.due().is_some_and(|t| t <= now) {
                parents.push((p, false));
            }
        }
        for (k, c) in &self.claims {
            let p = ParentRef {
                kind: ParentKind::VniClaim,
                key: k.clone(),
            };
            if c.deletion_requested {
                if c.finalize.due().is_some_and(|t| t <= now) {
                    parents.push((p, true));
                }
            } else if c.sync.due().is_some_and(|t| t <= now) {
                parents.push((p, false));
            }
        }
        for (p, finalize) in parents {
            if let Some(req) = self.request(&p) {
                work.push(match finalize {
                    true => Work::Finalize(p, req),
                    false => Work::Sync(p, req),
                });
            }
        }
        work
    }

    fn apply(&mut self, now: Timestamp, backoff: f64, cfg: &SimConfig, work: Vec<Work>, done: Vec<Done>) {
        let retry_at = now.plus(backoff);
        for (w, d) in work.into_iter().zip(done) {
            match (w, d) {
                (Work::Sync(p, _), Done::Sync(r)) => {
                    self.stats.sync_calls += 1;
                    self.apply_sync(&p, r, now, retry_at);
                }
                (Work::Finalize(p, _), Done::Finalize(r)) => {
                    self.stats.finalize_calls += 1;
                    self.apply_finalize(&p, r, now, retry_at);
                }
                (Work::Add(uid, _), Done::Cni(r)) => {
                    self.stats.cni_adds += 1;
                    self.apply_add(&uid, r, now, retry_at);
                }
                (Work::Del(uid, _), Done::Cni(r)) => {
                    self.stats.cni_dels += 1;
                    self.apply_del(&uid, r, now, retry_at, cfg);
                }
                _ => unreachable!("work and result kinds line up"),
            }
        }
    }

    fn set_parent_status(&mut self, p: &ParentRef, status: BTreeMap<String, Value>) {
        match p.kind {
            ParentKind::Job => {
                if let Some(j) = self.jobs.get_mut(&p.key) {
                    j.status = status;
                }
            }
            ParentKind::VniClaim => {
                if let Some(c) = self.claims.get_mut(&p.key) {
                    c.status = status;
                }
            }
        }
    }

    fn apply_sync(&mut self, p: &ParentRef, r: Result<SyncResponse, String>, now: Timestamp, retry_at: Timestamp) {
        let retry = match r {
            Ok(resp) => {
                let err = resp.status.get("error").and_then(|e| e.as_str()).map(str::to_owned);
                self.apply_children(p, resp.children, now);
                self.set_parent_status(p, resp.status);
                // a malformed annotation cannot fix itself
                err.is_some_and(|e| e != "MalformedAnnotation")
            }
            Err(e) => {
                self.stats.webhook_failures += 1;
                let mut status = BTreeMap::new();
                status.insert("error".to_owned(), Value::from("WebhookUnavailable"));
                status.insert("message".to_owned(), Value::from(e));
                self.set_parent_status(p, status);
                true
            }
        };
        if let Some(s) = self.parent_sync(p) {
            *s = match retry {
                true => Retry {
                    pending: true,
                    next_attempt: retry_at,
                },
                false => Retry::idle(),
            };
        }
    }

    fn apply_finalize(&mut self, p: &ParentRef, r: Result<FinalizeResponse, String>, now: Timestamp, retry_at: Timestamp) {
        let finished = match r {
            Ok(resp) => {
                self.apply_children(p, resp.children, now);
                if !resp.finalized {
                    self.set_parent_status(p, resp.status);
                }
                resp.finalized
            }
            Err(_) => {
                self.stats.webhook_failures += 1;
                false
            }
        };
        match (finished, p.kind) {
            (true, ParentKind::Job) => self.finish_job(&p.key, now),
            (true, ParentKind::VniClaim) => self.finish_claim(&p.key, now),
            (false, ParentKind::Job) => {
                if let Some(j) = self.jobs.get_mut(&p.key) {
                    j.finalize.next_attempt = retry_at;
                }
            }
            (false, ParentKind::VniClaim) => {
                if let Some(c) = self.claims.get_mut(&p.key) {
                    c.finalize.next_attempt = retry_at;
                }
            }
        }
    }

    fn apply_add(&mut self, uid: &str, r: Result<(), String>, now: Timestamp, retry_at: Timestamp) {
        let Some(pod) = self.pods.get_mut(uid) else { return };
        match r {
            Ok(()) => {
                pod.cni_added = true;
                if pod.phase != Phase::Pending {
                    // deleted while ADD was in flight; DEL follows
                    return;
                }
                pod.phase = Phase::Running;
                pod.finish_at = pod.run.map(|r| now.plus(r));
                pod.last_error = None;
                let (ns, name, node, job) = (pod.namespace.clone(), pod.name.clone(), pod.node.clone(), pod.job.clone());
                self.emit(now, ObjectKind::Pod, &ns, &name, uid, Phase::Running, node, None);
                if let Some(j) = self.jobs.get_mut(&job) {
                    if j.record.started_at.is_none() {
                        j.record.started_at = Some(now.0);
                        j.phase = Phase::Running;
                        let juid = j.uid.clone();
                        self.emit(now, ObjectKind::Job, &job.0, &job.1, &juid, Phase::Running, None, None);
                    }
                }
            }
            Err(e) => {
                self.stats.cni_failures += 1;
                pod.next_attempt = retry_at;
                pod.last_error = Some(e);
            }
        }
    }

    fn apply_del(&mut self, uid: &str, r: Result<(), String>, now: Timestamp, retry_at: Timestamp, cfg: &SimConfig) {
        let Some(pod) = self.pods.get_mut(uid) else { return };
        if let Err(e) = r {
            self.stats.cni_failures += 1;
            pod.next_attempt = retry_at;
            pod.last_error = Some(e);
            return;
        }
        pod.cni_added = false;
        match pod.phase {
            Phase::Terminating => self.remove_pod(uid, now),
            Phase::Running => {
                pod.phase = Phase::Succeeded;
                pod.finish_at = None;
                let (ns, name, node, job) = (pod.namespace.clone(), pod.name.clone(), pod.node.clone(), pod.job.clone());
                self.emit(now, ObjectKind::Pod, &ns, &name, uid, Phase::Succeeded, node, None);
                self.pod_succeeded(&job, now, cfg);
            }
            _ => {}
        }
    }

    fn pod_succeeded(&mut self, k: &Key, now: Timestamp, cfg: &SimConfig) {
        let Some(job) = self.jobs.get_mut(k) else { return };
        job.succeeded_pods += 1;
        if job.succeeded_pods < job.spec.pods || job.deletion_requested {
            return;
        }
        job.phase = Phase::Succeeded;
        job.record.completed_at = Some(now.0);
        if let Some(ttl) = job.spec.ttl_seconds_after_finished {
            // one garbage collector works through deletions in order
            let at = now.plus(ttl).max(self.gc_free_at).plus(cfg.delays.deletion_per_job);
            self.gc_free_at = at;
            job.gc_at = Some(at);
        }
        let uid = job.uid.clone();
        self.jobs_succeeded += 1;
        self.emit(now, ObjectKind::Job, &k.0, &k.1, &uid, Phase::Succeeded, None, None);
    }

    fn next_deadline(&self) -> Option<Timestamp> {
        let mut next = None;
        for j in self.jobs.values() {
            next = min_ts(next, j.create_pods_at);
            next = min_ts(next, j.gc_at);
            if j.deletion_requested {
                next = min_ts(next, j.finalize.due());
            } else {
                next = min_ts(next, j.sync.due());
            }
        }
        for c in self.claims.values() {
            next = min_ts(next, if c.deletion_requested { c.finalize.due() } else { c.sync.due() });
        }
        for p in self.pods.values() {
            let at = match p.phase {
                Phase::Pending if p.node.is_none() => {
                    let open = self.jobs.get(&p.job).is_some_and(|j| !j.gated || j.crd.is_some());
                    open.then_some(p.next_attempt)
                }
                Phase::Pending if !p.cni_added => p.ready_at,
                Phase::Running => p.finish_at,
                Phase::Terminating => p.terminate_at,
                _ => None,
            };
            next = min_ts(next, at.map(|t| t.max(p.next_attempt)));
        }
        next
    }
}
