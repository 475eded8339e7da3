use std::path::PathBuf;
use std::time::Duration;

use anyhow::Context;
use clap::Parser;
use molsync_core::{PeerId, Policy};
use molsync_peer::{connect, ActionScript, ClientOptions, SessionOptions};
use tracing_subscriber::EnvFilter;

/// Headless peer: joins a relay, optionally links to a master and plays a
/// script. Prints one JSON record per event on stdout.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Relay endpoint, e.g. ws://127.0.0.1:9473/ws
    #[arg(long, env = "MOLSYNC_SERVER")]
    server: String,
    /// Peer id to link to after joining.
    #[arg(long)]
    master: Option<PeerId>,
    /// Action script to play.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Re-share updates received from one link with the others.
    #[arg(long)]
    hub: bool,
    /// Send and apply toggles as "r,s,c/r,s,c" with 0 or 1.
    #[arg(long, default_value_t = Policy::default())]
    policy: Policy,
    /// Where received files are written.
    #[arg(long, default_value = "molsync-inbox")]
    staging_dir: PathBuf,
    /// Keep listening this long after the script ends. Runs until the relay
    /// closes the connection when omitted.
    #[arg(long)]
    linger_ms: Option<u64>,
    #[arg(long, env = "MOLSYNC_LOG", default_value = "warn")]
    log_level: String,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::new(&args.log_level))
        .with_writer(std::io::stderr)
        .init();

    let script = match &args.script {
        Some(path) => std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?
            .parse::<ActionScript>()
            .with_context(|| format!("parsing {}", path.display()))?,
        None => ActionScript::default(),
    };
    let opts = ClientOptions {
        session: SessionOptions {
            policy: args.policy,
            hub_mode: args.hub,
            ..SessionOptions::default()
        },
        staging_dir: Some(args.staging_dir),
        echo: true,
    };
    let mut client = connect(&args.server, args.master, opts).await?;
    eprintln!("joined as {}", client.id());
    client
        .run_script(script, args.linger_ms.map(Duration::from_millis))
        .await?;
    Ok(())
}
