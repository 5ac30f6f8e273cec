use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::RecvTimeoutError;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use slingkube_core::api::mgmt::Phase;
use slingkube_core::{NodeId, Timestamp};
use slingkube_sim::env::{ClockMode, CniMode, EnvConfig, EnvError, Environment, WebhookMode};
use slingkube_sim::{DelayModel, Event, JobSpec, ObjectKind, SimConfig, SimError};
use slingkube_store::replay::Replayer;
use slingkube_store::{AuditOp, Outcome, QuarantinePolicy, VniStore};

use crate::summary::sample_timeline;
use crate::{JobRow, Mode, RampConfig, Report, SpikeConfig, TimelineRow, Workload};

pub const NAMESPACE: &str = "bench";

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("environment down: {0}")]
    EnvironmentDown(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("run {run} ({mode}) did not finish: {deleted}/{total} jobs deleted after {seconds:.0}s")]
    Timeout {
        mode: Mode,
        run: u32,
        deleted: u64,
        total: u32,
        seconds: f64,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<EnvError> for BenchError {
    fn from(e: EnvError) -> Self {
        BenchError::EnvironmentDown(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunOptions {
    /// Delay draws depend on this and the job name only, so both modes
    /// see the same schedule.
    pub seed: u64,
    pub quarantine_seconds: f64,
    pub nodes: usize,
    pub delays: DelayModel,
    /// Give up on a run after this many seconds.
    pub timeout: f64,
    /// Spacing of active-job samples.
    pub sample_interval: f64,
    pub cni: CniMode,
    /// Runs execute concurrently. Needs the `parallel` feature.
    pub concurrent_runs: bool,
    pub fanout_threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 1,
            quarantine_seconds: 30.0,
            nodes: 2,
            delays: DelayModel::default(),
            timeout: 300.0,
            sample_interval: 0.5,
            cni: CniMode::InProcess,
            concurrent_runs: true,
            fanout_threads: 8,
        }
    }
}

impl RunOptions {
    /// Shortened quarantine keeps a spike of back-to-back runs short.
    pub fn spike() -> Self {
        RunOptions {
            quarantine_seconds: 3.0,
            ..Default::default()
        }
    }
}

/// Invariant and accounting checks of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunChecks {
    pub run: u32,
    pub jobs_submitted: u32,
    pub jobs_deleted: u64,
    pub acquires: usize,
    pub releases: usize,
    pub denials: usize,
    /// Found by the auditor replaying the audit log while the run was live.
    pub violations: Vec<String>,
    pub audit_checks: usize,
    pub allocated_at_end: usize,
    pub services_at_end: usize,
    pub sync_calls: u64,
    pub finalize_calls: u64,
    pub webhook_failures: u64,
    pub cni_failures: u64,
    /// Jobs whose event-log timings differ from the cluster's own records.
    pub record_mismatches: usize,
    pub wall_seconds: f64,
}

impl RunChecks {
    pub fn failures(&self, mode: Mode) -> Vec<String> {
        let mut out = Vec::new();
        let mut check = |ok: bool, what: String| {
            if !ok {
                out.push(what);
            }
        };
        check(
            self.jobs_deleted == self.jobs_submitted as u64,
            format!("{}/{} jobs deleted", self.jobs_deleted, self.jobs_submitted),
        );
        check(self.violations.is_empty(), format!("audit violations: {:?}", self.violations));
        check(self.allocated_at_end == 0, format!("{} VNIs still allocated", self.allocated_at_end));
        check(self.services_at_end == 0, format!("{} CXI services left", self.services_at_end));
        check(self.record_mismatches == 0, format!("{} event/record mismatches", self.record_mismatches));
        match mode {
            Mode::VniEnabled => {
                let n = self.jobs_submitted as usize;
                check(
                    self.acquires == n && self.releases == n,
                    format!("{} acquires / {} releases for {n} jobs", self.acquires, self.releases),
                );
            }
            Mode::VniDisabled => check(
                self.sync_calls == 0 && self.finalize_calls == 0 && self.acquires == 0,
                format!("baseline reached the endpoint ({} syncs)", self.sync_calls),
            ),
        }
        out
    }

    pub fn passed(&self, mode: Mode) -> bool {
        self.failures(mode).is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub mode: Mode,
    pub run: u32,
    pub jobs: Vec<JobRow>,
    pub timeline: Vec<TimelineRow>,
    pub checks: RunChecks,
}

#[derive(Default)]
struct Audit {
    checks: usize,
    acquires: usize,
    releases: usize,
    denials: usize,
    violations: Vec<String>,
}

/// Replays the audit log while the run is live.
fn audit(store: Arc<VniStore>, quarantine: QuarantinePolicy, stop: Arc<AtomicBool>) -> Audit {
    let mut replayer = Replayer::new(quarantine);
    let mut a = Audit::default();
    loop {
        let done = stop.load(Ordering::SeqCst);
        let batch = store.audit_log(replayer.last_seq()).expect("audit log readable");
        for r in &batch {
            match (r.op, r.outcome) {
                (AuditOp::Acquire, Outcome::Ok) => a.acquires += 1,
                (AuditOp::Release, Outcome::Ok) => a.releases += 1,
                (_, Outcome::Ok) => {}
                _ => a.denials += 1,
            }
        }
        replayer.apply_all(&batch);
        a.checks += 1;
        if done {
            break;
        }
        thread::sleep(Duration::from_millis(50));
    }
    a.violations = replayer.violations().iter().map(|v| format!("#{}: {}", v.seq, v.what)).collect();
    a
}

/// Collects job transitions as they happen.
fn consume(rx: std::sync::mpsc::Receiver<Event>, stop: Arc<AtomicBool>) -> Vec<Event> {
    let mut out = Vec::new();
    loop {
        match rx.recv_timeout(Duration::from_millis(50)) {
            Ok(e) if e.kind == ObjectKind::Job => out.push(e),
            Ok(_) => {}
            Err(RecvTimeoutError::Timeout) if !stop.load(Ordering::SeqCst) => {}
            Err(_) => break,
        }
    }
    out.extend(rx.try_iter().filter(|e| e.kind == ObjectKind::Job));
    out
}

fn job_name(run: u32, batch: usize, k: u32) -> String {
    format!("r{run}-b{batch:02}-j{k:03}")
}

fn sleep_until(cluster: &slingkube_sim::Cluster, t: Timestamp) {
    let wait = t.since(cluster.now());
    if wait > 0.0 {
        thread::sleep(Duration::from_secs_f64(wait));
    }
}

/// One run of `workload` on a fresh wall-clock cluster.
pub fn run_once(workload: &Workload, mode: Mode, run: u32, opts: &RunOptions) -> Result<RunOutcome, BenchError> {
    workload.validate()?;
    let began = Instant::now();
    let env = Environment::start(EnvConfig {
        sim: SimConfig {
            nodes: (0..opts.nodes).map(|i| NodeId::new(format!("n{i}"))).collect(),
            delays: opts.delays.clone(),
            seed: opts.seed.wrapping_add(run as u64),
            fanout_threads: opts.fanout_threads,
            ..Default::default()
        },
        clock: ClockMode::Wall,
        webhook: WebhookMode::Http,
        cni: opts.cni.clone(),
        quarantine_seconds: opts.quarantine_seconds,
        ..Default::default()
    })?;
    let url = env.endpoint_url().expect("http endpoint");
    ureq::get(format!("{url}/healthz"))
        .call()
        .map_err(|e| BenchError::EnvironmentDown(format!("{url}: {e}")))?;

    let stop = Arc::new(AtomicBool::new(false));
    let consumer = {
        let (rx, stop) = (env.cluster.subscribe(), stop.clone());
        thread::spawn(move || consume(rx, stop))
    };
    let auditor = {
        let (store, stop) = (env.store.clone(), stop.clone());
        let q = QuarantinePolicy::new(opts.quarantine_seconds).expect("validated by the environment");
        thread::spawn(move || audit(store, q, stop))
    };
    let reconcile = env.cluster.spawn_loop();

    let annotations = match mode {
        Mode::VniEnabled => BTreeMap::from([("vni".to_owned(), "true".to_owned())]),
        Mode::VniDisabled => BTreeMap::new(),
    };
    let total = workload.total_jobs();
    let mut batch_of = BTreeMap::new();
    let t0 = env.cluster.now();
    for (i, (offset, count)) in workload.schedule().into_iter().enumerate() {
        sleep_until(&env.cluster, t0.plus(offset));
        for k in 0..count {
            let name = job_name(run, i, k);
            env.cluster.submit_job(NAMESPACE, &name, annotations.clone(), JobSpec::echo())?;
            batch_of.insert(slingkube_core::OwnerRef::job(NAMESPACE, &name).to_string(), i as u32);
        }
    }
    let timed_out = loop {
        let deleted = env.cluster.summary(0).jobs_deleted;
        if deleted >= total as u64 {
            break None;
        }
        if began.elapsed().as_secs_f64() > opts.timeout {
            break Some(deleted);
        }
        thread::sleep(Duration::from_millis(20));
    };
    reconcile.stop();
    stop.store(true, Ordering::SeqCst);
    let events = consumer.join().expect("consumer thread");
    let audit = auditor.join().expect("auditor thread");
    if let Some(deleted) = timed_out {
        return Err(BenchError::Timeout {
            mode,
            run,
            deleted,
            total,
            seconds: opts.timeout,
        });
    }

    // rebuild timings from the event log, then hold them against the
    // cluster's own bookkeeping
    let mut from_events: BTreeMap<String, [Option<f64>; 4]> = BTreeMap::new();
    for e in &events {
        let slot = match e.phase {
            Phase::Pending => 0,
            Phase::Running => 1,
            Phase::Succeeded => 2,
            Phase::Deleted => 3,
            _ => continue,
        };
        let key = slingkube_core::OwnerRef::job(&e.namespace, &e.name).to_string();
        from_events.entry(key).or_default()[slot] = Some(e.t - t0.0);
    }
    let records = env.cluster.records();
    let rel = |t: Option<f64>| t.map(|t| t - t0.0);
    let mut mismatches = 0;
    let jobs: Vec<JobRow> = records
        .iter()
        .map(|r| {
            let row = JobRow {
                job_ref: r.job_ref.clone(),
                mode,
                run,
                batch: batch_of[&r.job_ref],
                submit: r.submitted_at - t0.0,
                start: rel(r.started_at),
                complete: rel(r.completed_at),
                delete: rel(r.deleted_at),
            };
            let seen = from_events.get(&r.job_ref).copied().unwrap_or_default();
            if seen != [Some(row.submit), row.start, row.complete, row.delete] {
                mismatches += 1;
            }
            row
        })
        .collect();

    let stats = env.cluster.stats();
    let checks = RunChecks {
        run,
        jobs_submitted: total,
        jobs_deleted: env.cluster.summary(0).jobs_deleted,
        acquires: audit.acquires,
        releases: audit.releases,
        denials: audit.denials,
        violations: audit.violations,
        audit_checks: audit.checks,
        allocated_at_end: env.vnis_allocated(),
        services_at_end: env.cxi_services(),
        sync_calls: stats.sync_calls,
        finalize_calls: stats.finalize_calls,
        webhook_failures: stats.webhook_failures,
        cni_failures: stats.cni_failures,
        record_mismatches: mismatches,
        wall_seconds: began.elapsed().as_secs_f64(),
    };
    Ok(RunOutcome {
        mode,
        run,
        timeline: sample_timeline(&jobs, mode, run, opts.sample_interval),
        jobs,
        checks,
    })
}

/// Every run of `workload` in every mode. Both modes use the same seed.
pub fn sweep(workload: &Workload, modes: &[Mode], opts: &RunOptions) -> Result<Report, BenchError> {
    workload.validate()?;
    let tasks: Vec<(Mode, u32)> = modes
        .iter()
        .flat_map(|m| (0..workload.runs()).map(move |r| (*m, r)))
        .collect();
    let outcomes = run_all(workload, &tasks, opts)?;
    Ok(Report::new(workload.clone(), opts.seed, opts.sample_interval, outcomes))
}

#[cfg(feature = "parallel")]
fn run_all(workload: &Workload, tasks: &[(Mode, u32)], opts: &RunOptions) -> Result<Vec<RunOutcome>, BenchError> {
    use rayon::prelude::*;
    if !opts.concurrent_runs || tasks.len() < 2 {
        return tasks.iter().map(|(m, r)| run_once(workload, *m, *r, opts)).collect();
    }
    // runs mostly wait on timers, so give each its own thread
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(tasks.len())
        .thread_name(|i| format!("run-{i}"))
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    pool.install(|| tasks.par_iter().map(|(m, r)| run_once(workload, *m, *r, opts)).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_all(workload: &Workload, tasks: &[(Mode, u32)], opts: &RunOptions) -> Result<Vec<RunOutcome>, BenchError> {
    tasks.iter().map(|(m, r)| run_once(workload, *m, *r, opts)).collect()
}

pub fn run_ramp(cfg: RampConfig, modes: &[Mode], opts: &RunOptions) -> Result<Report, BenchError> {
    sweep(&Workload::Ramp(cfg), modes, opts)
}

pub fn run_spike(cfg: SpikeConfig, modes: &[Mode], opts: &RunOptions) -> Result<Report, BenchError> {
    sweep(&Workload::Spike(cfg), modes, opts)
}
