use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use slingkube_core::{VniRange, WallClock};
use slingkube_endpoint::{server, VniEndpoint};
use slingkube_store::{QuarantinePolicy, StoreConfig, VniStore};

#[derive(Parser)]
#[command(about = "VNI controller webhook endpoint")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve /sync, /finalize and /healthz.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long)]
        db: PathBuf,
        #[arg(long, default_value_t = 1024)]
        pool_start: u16,
        #[arg(long, default_value_t = 65535)]
        pool_end: u16,
        /// Reuse quarantine in seconds.
        #[arg(long, default_value_t = 30.0)]
        quarantine: f64,
    },
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let Cmd::Serve {
        bind,
        db,
        pool_start,
        pool_end,
        quarantine,
    } = Cli::parse().cmd;
    let config = StoreConfig {
        pool: VniRange::new(pool_start, pool_end)?,
        quarantine: QuarantinePolicy::new(quarantine)?,
        ..Default::default()
    };
    let store = Arc::new(VniStore::open(db, config)?);
    let ep = VniEndpoint::new(store, Arc::new(WallClock::new()));
    slingkube_core::server::serve_forever(bind, server::router(ep))?;
    Ok(())
}
