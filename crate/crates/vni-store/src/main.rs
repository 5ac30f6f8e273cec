use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;
use slingkube_core::VniRange;
use slingkube_store::{StoreConfig, VniStore};

/// Inspect a VNI database.
#[derive(Parser)]
#[command(name = "vni-store", version)]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print every non-free VNI, then the audit log, as JSON lines.
    Dump {
        #[arg(long)]
        db: PathBuf,
        #[arg(long, default_value_t = 1024)]
        pool_start: u16,
        #[arg(long, default_value_t = 65535)]
        pool_end: u16,
    },
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    match Args::parse().cmd {
        Cmd::Dump {
            db,
            pool_start,
            pool_end,
        } => {
            if !db.exists() {
                return Err(format!("{} does not exist", db.display()).into());
            }
            let config = StoreConfig {
                pool: VniRange::new(pool_start, pool_end)?,
                ..Default::default()
            };
            let store = VniStore::open(&db, config)?;
            let mut out = io::stdout().lock();
            for rec in store.snapshot()? {
                writeln!(out, "{}", json!({"type": "vni", "record": rec}))?;
            }
            for rec in store.audit_log(0)? {
                writeln!(out, "{}", json!({"type": "audit", "record": rec}))?;
            }
        }
    }
    Ok(())
}
