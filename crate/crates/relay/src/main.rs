use std::net::IpAddr;

use anyhow::Context;
use clap::Parser;
use molsync_relay::{serve, ServerConfig};
use tokio::net::TcpListener;
use tracing_subscriber::EnvFilter;

/// Relay server for shared molecular viewing sessions.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    #[arg(long, env = "MOLSYNC_BIND", default_value = "127.0.0.1")]
    bind: IpAddr,
    #[arg(long, env = "MOLSYNC_PORT", default_value_t = 9473)]
    port: u16,
    #[arg(long, env = "MOLSYNC_MAX_PEERS", default_value_t = molsync_relay::registry::DEFAULT_MAX_PEERS)]
    max_peers: usize,
    /// Seed for peer id allocation. For reproducible tests only.
    #[arg(long, env = "MOLSYNC_ID_SEED")]
    id_seed: Option<u64>,
    #[arg(long, env = "MOLSYNC_LOG_LEVEL", default_value = "info")]
    log_level: String,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_new(&args.log_level).context("bad --log-level")?)
        .init();
    let listener = TcpListener::bind((args.bind, args.port))
        .await
        .with_context(|| format!("binding {}:{}", args.bind, args.port))?;
    let config = ServerConfig {
        max_peers: args.max_peers,
        id_seed: args.id_seed,
        ..ServerConfig::default()
    };
    serve(listener, config).await?;
    Ok(())
}
