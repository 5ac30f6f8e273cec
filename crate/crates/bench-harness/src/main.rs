use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use slingkube_bench::{emit, sweep, Mode, RampConfig, RunOptions, SpikeConfig, Workload};

#[derive(Parser)]
#[command(name = "bench", about = "Job admission experiments with and without VNI handling")]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, default_value_t = 5)]
    runs: u32,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Jobs in the spike.
    #[arg(long, default_value_t = 500)]
    jobs: u32,
    /// Defaults to 30 s for ramp and 3 s for spike.
    #[arg(long)]
    quarantine: Option<f64>,
    /// Execute runs one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Ramp,
    Spike,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Vni,
    Novni,
    /// Both modes with the same seed, in one report.
    Both,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (workload, mut opts) = match cli.experiment {
        Experiment::Ramp => (
            Workload::Ramp(RampConfig {
                runs: cli.runs,
                ..Default::default()
            }),
            RunOptions::default(),
        ),
        Experiment::Spike => (
            Workload::Spike(SpikeConfig {
                job_count: cli.jobs,
                runs: cli.runs,
            }),
            RunOptions::spike(),
        ),
    };
    opts.seed = cli.seed;
    opts.concurrent_runs = !cli.sequential;
    if let Some(q) = cli.quarantine {
        opts.quarantine_seconds = q;
    }
    let modes: &[Mode] = match cli.mode {
        ModeArg::Vni => &[Mode::VniEnabled],
        ModeArg::Novni => &[Mode::VniDisabled],
        ModeArg::Both => &[Mode::VniEnabled, Mode::VniDisabled],
    };
    let report = match sweep(&workload, modes, &opts) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("bench: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Err(e) = emit(&report, &cli.out) {
        eprintln!("bench: {e}");
        return ExitCode::FAILURE;
    }
    for s in &report.summaries {
        println!(
            "{} {}: {} jobs, admission median {:.3}s p10 {:.3}s p90 {:.3}s",
            report.experiment, s.mode, s.jobs, s.overall.median, s.overall.p10, s.overall.p90
        );
        for c in &s.checks {
            for f in c.failures(s.mode) {
                println!("  run {}: {f}", c.run);
            }
        }
    }
    if let Some(o) = report.overhead {
        println!("overhead {:.2}%", o * 100.0);
    }
    match report.checks_pass() {
        true => ExitCode::SUCCESS,
        false => ExitCode::FAILURE,
    }
}
