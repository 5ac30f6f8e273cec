use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::stats::{is_single_peaked, mean, nearest_rank, overhead, sorted};
use crate::{Mode, RunChecks, RunOutcome, Workload};

/// One job of one run. Times are seconds since the run's first submission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRow {
    pub job_ref: String,
    pub mode: Mode,
    pub run: u32,
    pub batch: u32,
    pub submit: f64,
    pub start: Option<f64>,
    pub complete: Option<f64>,
    pub delete: Option<f64>,
}

impl JobRow {
    pub fn admission_delay(&self) -> Option<f64> {
        self.start.map(|s| s - self.submit)
    }

    /// Admission plus deletion: submission until the job object is gone.
    pub fn job_time(&self) -> Option<f64> {
        self.delete.map(|d| d - self.submit)
    }

    fn active_at(&self, t: f64) -> bool {
        self.start.is_some_and(|s| s <= t) && self.delete.is_none_or(|d| t < d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub mode: Mode,
    pub run: u32,
    pub t: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchDelay {
    pub batch: u32,
    pub jobs: usize,
    pub mean: f64,
    pub p10: f64,
    pub p90: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

/// Active jobs across runs at one sample time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub t: f64,
    /// Median over runs.
    pub count: usize,
    pub p10: usize,
    pub p90: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub mode: Mode,
    pub runs: u32,
    pub jobs: usize,
    pub per_batch_delay: Vec<BatchDelay>,
    /// Admission delay over every job of every run.
    pub overall: Overall,
    pub active_jobs_timeline: Vec<TimelinePoint>,
    pub checks: Vec<RunChecks>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub workload: Workload,
    pub sample_interval: f64,
    pub summaries: Vec<RunSummary>,
    /// `(median_vni - median_novni) / median_novni` when both modes ran.
    pub overhead: Option<f64>,
    #[serde(skip)]
    pub jobs: Vec<JobRow>,
    #[serde(skip)]
    pub timeline: Vec<TimelineRow>,
}

pub(crate) fn sample_timeline(rows: &[JobRow], mode: Mode, run: u32, interval: f64) -> Vec<TimelineRow> {
    let end = rows
        .iter()
        .flat_map(|r| [r.delete, r.complete, r.start, Some(r.submit)])
        .flatten()
        .fold(0.0f64, f64::max);
    let samples = (end / interval).ceil() as usize + 1;
    (0..=samples)
        .map(|k| {
            let t = k as f64 * interval;
            TimelineRow {
                mode,
                run,
                t,
                count: rows.iter().filter(|r| r.active_at(t)).count(),
            }
        })
        .collect()
}

fn percentiles(values: impl IntoIterator<Item = f64>) -> Overall {
    let v = sorted(values);
    Overall {
        median: nearest_rank(&v, 50.0).unwrap_or(f64::NAN),
        p10: nearest_rank(&v, 10.0).unwrap_or(f64::NAN),
        p90: nearest_rank(&v, 90.0).unwrap_or(f64::NAN),
    }
}

impl RunSummary {
    fn build(mode: Mode, outcomes: &[&RunOutcome]) -> RunSummary {
        let rows: Vec<&JobRow> = outcomes.iter().flat_map(|o| &o.jobs).collect();
        let mut by_batch: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for r in &rows {
            if let Some(d) = r.admission_delay() {
                by_batch.entry(r.batch).or_default().push(d);
            }
        }
        let per_batch_delay = by_batch
            .into_iter()
            .map(|(batch, delays)| {
                let p = percentiles(delays.iter().copied());
                BatchDelay {
                    batch,
                    jobs: delays.len(),
                    mean: mean(&delays).unwrap_or(f64::NAN),
                    p10: p.p10,
                    p90: p.p90,
                }
            })
            .collect();

        let mut at: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
        for o in outcomes {
            for (k, s) in o.timeline.iter().enumerate() {
                at.entry(k).or_default().push((s.t, s.count));
            }
        }
        let active_jobs_timeline = at
            .into_values()
            .map(|mut v| {
                // runs that already ended count as zero
                v.resize(outcomes.len(), (v[0].0, 0));
                let counts = sorted(v.iter().map(|x| x.1 as f64));
                let pick = |p| nearest_rank(&counts, p).unwrap_or(0.0) as usize;
                TimelinePoint {
                    t: v[0].0,
                    count: pick(50.0),
                    p10: pick(10.0),
                    p90: pick(90.0),
                }
            })
            .collect();

        RunSummary {
            mode,
            runs: outcomes.len() as u32,
            jobs: rows.len(),
            per_batch_delay,
            overall: percentiles(rows.iter().filter_map(|r| r.admission_delay())),
            active_jobs_timeline,
            checks: outcomes.iter().map(|o| o.checks.clone()).collect(),
        }
    }

    pub fn checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed(self.mode))
    }
}

impl Report {
    pub fn new(workload: Workload, seed: u64, sample_interval: f64, mut outcomes: Vec<RunOutcome>) -> Report {
        outcomes.sort_by_key(|o| (o.mode, o.run));
        let mut modes: Vec<Mode> = outcomes.iter().map(|o| o.mode).collect();
        modes.dedup();
        let summaries: Vec<RunSummary> = modes
            .iter()
            .map(|m| {
                let of: Vec<&RunOutcome> = outcomes.iter().filter(|o| o.mode == *m).collect();
                RunSummary::build(*m, &of)
            })
            .collect();
        let median = |m| summaries.iter().find(|s| s.mode == m).map(|s| s.overall.median);
        let overhead = match (median(Mode::VniEnabled), median(Mode::VniDisabled)) {
            (Some(v), Some(b)) => Some(overhead(v, b)),
            _ => None,
        };
        Report {
            experiment: workload.name().to_owned(),
            seed,
            workload,
            sample_interval,
            summaries,
            overhead,
            jobs: outcomes.iter().flat_map(|o| o.jobs.iter().cloned()).collect(),
            timeline: outcomes.into_iter().flat_map(|o| o.timeline).collect(),
        }
    }

    pub fn summary(&self, mode: Mode) -> Option<&RunSummary> {
        self.summaries.iter().find(|s| s.mode == mode)
    }

    pub fn checks_pass(&self) -> bool {
        self.summaries.iter().all(RunSummary::checks_pass)
    }

    /// Runs whose own active-jobs series has more than one peak.
    pub fn multi_peaked_runs(&self) -> Vec<(Mode, u32)> {
        let mut series: BTreeMap<(Mode, u32), Vec<usize>> = BTreeMap::new();
        for r in &self.timeline {
            series.entry((r.mode, r.run)).or_default().push(r.count);
        }
        series
            .into_iter()
            .filter(|(_, c)| !is_single_peaked(c))
            .map(|(k, _)| k)
            .collect()
    }
}

