use proptest::prelude::*;
use slingkube_bench::stats::{is_single_peaked, median, nearest_rank, overhead, sorted};
use slingkube_bench::{
    emit, load_jobs_csv, load_timeline_csv, sweep, BenchError, JobRow, Mode, RampConfig, Report, RunChecks,
    RunOptions, RunOutcome, SpikeConfig, TimelineRow, Workload, JOBS_CSV, SUMMARY_JSON, TIMELINE_CSV,
};
use slingkube_sim::{DelayModel, Jitter};

#[test]
fn default_ramp_is_200_jobs_in_29_batches() {
    let c = RampConfig::default();
    let b = c.batches();
    assert_eq!(b.len(), 10 + 10 + 9);
    // 1..=10 up, ten batches of 10, 9..=1 down
    let expected: u32 = (1..=10).sum::<u32>() + 10 * 10 + (1..=9).sum::<u32>();
    assert_eq!(expected, 200);
    assert_eq!(c.total_jobs(), expected);
    assert_eq!(&b[..10], &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
    assert!(b[10..20].iter().all(|n| *n == 10));
    assert_eq!(&b[20..], &[9, 8, 7, 6, 5, 4, 3, 2, 1]);
    let sched = Workload::Ramp(c).schedule();
    assert_eq!(sched[28].0, 28.0);
}

#[test]
fn bad_configs_are_rejected() {
    for c in [
        RampConfig { start: 5, peak: 3, ..Default::default() },
        RampConfig { step: 0, ..Default::default() },
        RampConfig { start: 0, ..Default::default() },
        RampConfig { runs: 0, ..Default::default() },
    ] {
        assert!(matches!(c.validate(), Err(BenchError::Config(_))), "{c:?}");
    }
    assert!(SpikeConfig { job_count: 0, runs: 1 }.validate().is_err());
    let r = sweep(&Workload::Spike(SpikeConfig { job_count: 0, runs: 1 }), &[Mode::VniEnabled], &RunOptions::default());
    assert!(matches!(r, Err(BenchError::Config(_))));
}

// smallest value v with at least p% of the data <= v
fn rank_oracle(data: &[f64], p: f64) -> f64 {
    let n = data.len() as f64;
    *data
        .iter()
        .filter(|v| data.iter().filter(|w| *w <= *v).count() as f64 * 100.0 >= p * n)
        .min_by(|a, b| a.total_cmp(b))
        .unwrap()
}

fn peak_oracle(c: &[usize]) -> bool {
    c.is_empty()
        || (0..c.len()).any(|i| c[..=i].windows(2).all(|w| w[0] <= w[1]) && c[i..].windows(2).all(|w| w[0] >= w[1]))
}

proptest! {
    #[test]
    fn ramp_schedule_matches_a_direct_count(start in 1u32..6, extra in 0u32..12, step in 1u32..5, sustain in 0u32..12) {
        let peak = start + extra;
        let c = RampConfig { start, peak, step, sustain_batches: sustain, ..Default::default() };
        let mut up = vec![];
        let mut n = start;
        while n < peak { up.push(n); n += step; }
        up.push(peak);
        let total: u32 = 2 * up.iter().sum::<u32>() - peak + sustain * peak;
        prop_assert_eq!(c.total_jobs(), total);
        prop_assert_eq!(c.batches().len(), 2 * up.len() - 1 + sustain as usize);
        prop_assert_eq!(c.batches().iter().max().copied(), Some(peak));
    }

    #[test]
    fn nearest_rank_matches_definition(data in prop::collection::vec(-1e3f64..1e3, 1..60), p in 0.0f64..=100.0) {
        let s = sorted(data.iter().copied());
        prop_assert_eq!(nearest_rank(&s, p).unwrap(), rank_oracle(&s, p.max(f64::MIN_POSITIVE)));
    }

    #[test]
    fn percentiles_are_ordered(data in prop::collection::vec(0.0f64..100.0, 1..80)) {
        let s = sorted(data);
        let (a, b, c) = (nearest_rank(&s, 10.0).unwrap(), nearest_rank(&s, 50.0).unwrap(), nearest_rank(&s, 90.0).unwrap());
        prop_assert!(a <= b && b <= c);
    }

    #[test]
    fn single_peak_matches_brute_force(c in prop::collection::vec(0usize..6, 0..14)) {
        prop_assert_eq!(is_single_peaked(&c), peak_oracle(&c));
    }
}

#[test]
fn single_peak_examples() {
    assert!(is_single_peaked(&[0, 1, 3, 3, 2, 0]));
    assert!(is_single_peaked(&[5, 4, 0]));
    assert!(!is_single_peaked(&[0, 2, 1, 2, 0]));
    assert!(!is_single_peaked(&[3, 0, 3]));
}

#[test]
fn overhead_of_a_scaled_median() {
    let base = [1.0, 2.0, 3.0, 4.0, 5.0];
    let vni: Vec<f64> = base.iter().map(|d| d * 1.035).collect();
    let o = overhead(median(vni).unwrap(), median(base).unwrap());
    assert!((o - 0.035).abs() < 1e-12);
}

fn outcome(mode: Mode, run: u32, delays: &[f64]) -> RunOutcome {
    let jobs: Vec<JobRow> = delays
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let submit = i as f64 * 0.25;
            JobRow {
                job_ref: format!("job:bench/r{run}-b{:02}-j000", i),
                mode,
                run,
                batch: i as u32 / 2,
                submit,
                start: Some(submit + d),
                complete: Some(submit + d + 0.05),
                delete: Some(submit + d + 1.0 / 3.0),
            }
        })
        .collect();
    let timeline = (0..6)
        .map(|k| TimelineRow { mode, run, t: k as f64 * 0.5, count: [0, 2, 3, 3, 1, 0][k] })
        .collect();
    let n = delays.len();
    let acquired = if mode == Mode::VniEnabled { n } else { 0 };
    let checks = RunChecks {
        run,
        jobs_submitted: n as u32,
        jobs_deleted: n as u64,
        acquires: acquired,
        releases: acquired,
        ..Default::default()
    };
    RunOutcome { mode, run, jobs, timeline, checks }
}

fn synthetic() -> Report {
    let base = [0.7, 1.3, 0.9, 2.1, 1.1, 0.8];
    let outs = vec![
        outcome(Mode::VniEnabled, 1, &base.map(|d| d * 1.035)),
        outcome(Mode::VniDisabled, 0, &base),
        outcome(Mode::VniEnabled, 0, &base.map(|d| d * 1.035)),
        outcome(Mode::VniDisabled, 1, &base),
    ];
    Report::new(Workload::Ramp(RampConfig::default()), 9, 0.5, outs)
}

#[test]
fn report_aggregates_runs_per_mode() {
    let r = synthetic();
    assert_eq!(r.summaries.len(), 2);
    let novni = r.summary(Mode::VniDisabled).unwrap();
    assert_eq!(novni.jobs, 12);
    assert_eq!(novni.per_batch_delay.len(), 3);
    // batch 0 holds 0.7 and 1.3 from both runs
    let b0 = &novni.per_batch_delay[0];
    assert_eq!((b0.jobs, b0.p10, b0.p90), (4, 0.7, 1.3));
    assert!((b0.mean - 1.0).abs() < 1e-12);
    assert!((novni.overall.median - 0.9).abs() < 1e-12);
    assert!((r.overhead.unwrap() - 0.035).abs() < 1e-9);
    assert_eq!(novni.active_jobs_timeline.len(), 6);
    assert_eq!(novni.active_jobs_timeline[2].count, 3);
    assert!(r.multi_peaked_runs().is_empty());
    assert!(r.checks_pass());
    let mut broken = synthetic();
    broken.summaries[0].checks[1].releases -= 1;
    assert!(!broken.checks_pass());
}

#[test]
fn emit_is_deterministic_and_round_trips() {
    let r = synthetic();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit(&r, a.path()).unwrap();
    emit(&synthetic(), b.path()).unwrap();
    for f in [JOBS_CSV, TIMELINE_CSV, SUMMARY_JSON] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let text = std::fs::read_to_string(a.path().join(JOBS_CSV)).unwrap();
    assert_eq!(text.lines().next().unwrap(), "job_ref,mode,run,batch,submit,start,complete,delete");
    assert_eq!(text.lines().count(), 24 + 1);

    let rows = load_jobs_csv(&a.path().join(JOBS_CSV)).unwrap();
    for mode in [Mode::VniEnabled, Mode::VniDisabled] {
        let m = median(rows.iter().filter(|j| j.mode == mode).filter_map(|j| j.admission_delay())).unwrap();
        assert!((m - r.summary(mode).unwrap().overall.median).abs() < 2e-6);
    }
    assert_eq!(load_timeline_csv(&a.path().join(TIMELINE_CSV)).unwrap(), r.timeline);
    let back: Report = serde_json::from_slice(&std::fs::read(a.path().join(SUMMARY_JSON)).unwrap()).unwrap();
    assert_eq!(back.summaries, r.summaries);
}

fn quick() -> RunOptions {
    RunOptions {
        delays: DelayModel {
            pod_create: Jitter::fixed(0.02),
            sandbox_start: Jitter { mean: 0.1, spread: 0.05 },
            sandbox_slots: 4,
            deletion_per_job: 0.02,
        },
        quarantine_seconds: 1.0,
        timeout: 60.0,
        sample_interval: 0.1,
        ..Default::default()
    }
}

#[test]
fn small_ramp_in_both_modes() {
    let cfg = RampConfig { start: 1, peak: 3, step: 1, sustain_batches: 1, batch_interval: 0.2, runs: 2 };
    let r = sweep(&Workload::Ramp(cfg), &[Mode::VniEnabled, Mode::VniDisabled], &quick()).unwrap();
    assert_eq!(r.jobs.len(), 2 * 2 * 12);
    for s in &r.summaries {
        assert!(s.checks_pass(), "{:?}", s.checks.iter().map(|c| c.failures(s.mode)).collect::<Vec<_>>());
        assert_eq!(s.per_batch_delay.len(), 6);
        assert!(s.overall.p10 <= s.overall.median && s.overall.median <= s.overall.p90);
    }
    let novni = r.summary(Mode::VniDisabled).unwrap();
    assert!(novni.checks.iter().all(|c| c.sync_calls == 0 && c.acquires == 0));
    let vni = r.summary(Mode::VniEnabled).unwrap();
    assert!(vni.checks.iter().all(|c| c.acquires == 12 && c.releases == 12 && c.audit_checks > 1));
    for j in &r.jobs {
        let (s, c, d) = (j.start.unwrap(), j.complete.unwrap(), j.delete.unwrap());
        assert!(j.submit <= s && s <= c && c <= d);
    }
}
