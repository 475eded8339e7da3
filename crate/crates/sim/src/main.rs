use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use molsync_sim::{render_table, rows_to_json, sweep, vary, NetProfile, Scenario};

/// Runs a scenario on a simulated network and prints a summary table.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Network profile, e.g. "lat=100,jit=20,loss=0,seed=7".
    #[arg(long, default_value = "lat=0")]
    profile: NetProfile,
    /// Vary one profile key, e.g. "lat=10,50,100,250".
    #[arg(long)]
    sweep: Option<String>,
    /// Write the full JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let scenario = Scenario::load(&args.scenario)?;
    let profiles = match &args.sweep {
        Some(spec) => vary(&args.profile, spec)?,
        None => vec![args.profile.clone()],
    };
    let rows = sweep(&profiles, &scenario)?;
    print!("{}", render_table(&rows));
    if let Some(out) = &args.out {
        let body = match (&args.sweep, rows.as_slice()) {
            (None, [row]) if row.report.is_some() => row.report.as_ref().unwrap().to_json(),
            _ => rows_to_json(&rows),
        };
        std::fs::write(out, body + "\n").with_context(|| format!("writing {}", out.display()))?;
    }
    if rows.iter().any(|r| r.error.is_some()) {
        std::process::exit(2);
    }
    Ok(())
}
