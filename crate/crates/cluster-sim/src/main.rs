use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use slingkube_sim::env::{ClockMode, Environment};
use slingkube_sim::scenario::{self, Scenario};

#[derive(Parser)]
#[command(name = "cluster-sim", about = "Run a scripted workload against the simulated cluster")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Play a scenario file and print the final summary as JSON.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's clock.
        #[arg(long, value_enum)]
        clock: Option<Clock>,
        /// Write phase transitions here, one JSON object per line.
        #[arg(long)]
        events: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Clock {
    Virtual,
    Wall,
}

fn run(path: PathBuf, clock: Option<Clock>, events: Option<PathBuf>) -> Result<(), Box<dyn std::error::Error>> {
    let mut sc: Scenario = serde_json::from_reader(File::open(&path)?)?;
    if let Some(c) = clock {
        sc.env.clock = match c {
            Clock::Virtual => ClockMode::Virtual,
            Clock::Wall => ClockMode::Wall,
        };
    }
    let env = Environment::start(sc.env.clone())?;
    if let Some(p) = events {
        env.cluster.set_event_log(Box::new(BufWriter::new(File::create(p)?)));
    }
    let result = scenario::play(&env, &sc.actions, sc.max_steps);
    env.cluster.flush_event_log();
    let summary = result?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn main() -> ExitCode {
    let Cli { cmd: Cmd::Run { scenario, clock, events } } = Cli::parse();
    match run(scenario, clock, events) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cluster-sim: {e}");
            ExitCode::FAILURE
        }
    }
}
