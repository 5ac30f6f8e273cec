use std::net::SocketAddr;
use std::sync::Arc;

use clap::Parser;
use slingkube_cxi::{server, Fabric};

/// Simulated CXI driver exposing the per-node service management socket.
#[derive(Parser)]
#[command(name = "cxi-sim", version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:7070")]
    bind: SocketAddr,
    /// Comma separated node names.
    #[arg(long, value_delimiter = ',', default_value = "n0,n1")]
    nodes: Vec<String>,
}

fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let fabric = Arc::new(Fabric::new(args.nodes));
    eprintln!("cxi-sim listening on {}", args.bind);
    slingkube_core::server::serve_forever(args.bind, server::router(fabric))
}
