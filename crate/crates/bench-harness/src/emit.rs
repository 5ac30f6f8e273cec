//! Result files. Column order is fixed and numbers are printed with six
//! decimals, so the same report always produces the same bytes.

use std::fs;
use std::path::Path;

use crate::{BenchError, JobRow, Mode, Report, TimelineRow};

pub const JOBS_CSV: &str = "jobs.csv";
pub const TIMELINE_CSV: &str = "timeline.csv";
pub const SUMMARY_JSON: &str = "summary.json";

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn mode(m: Mode) -> &'static str {
    match m {
        Mode::VniEnabled => "VniEnabled",
        Mode::VniDisabled => "VniDisabled",
    }
}

pub fn emit(report: &Report, dir: &Path) -> Result<(), BenchError> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(JOBS_CSV))?;
    w.write_record(["job_ref", "mode", "run", "batch", "submit", "start", "complete", "delete"])?;
    for r in &report.jobs {
        w.write_record([
            r.job_ref.clone(),
            mode(r.mode).into(),
            r.run.to_string(),
            r.batch.to_string(),
            num(r.submit),
            opt(r.start),
            opt(r.complete),
            opt(r.delete),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join(TIMELINE_CSV))?;
    w.write_record(["mode", "run", "t", "count"])?;
    for r in &report.timeline {
        w.write_record([mode(r.mode).into(), r.run.to_string(), num(r.t), r.count.to_string()])?;
    }
    w.flush()?;

    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join(SUMMARY_JSON), json)?;
    Ok(())
}

pub fn load_jobs_csv(path: &Path) -> Result<Vec<JobRow>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn load_timeline_csv(path: &Path) -> Result<Vec<TimelineRow>, BenchError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}
