//! Running one scenario under several network profiles.

use std::fmt::Write;

use serde::Serialize;

use crate::engine::run_scenario;
use crate::profile::{NetProfile, ProfileError};
use crate::report::ScenarioReport;
use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("sweep needs at least one profile")]
    NoProfiles,
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("sweep must look like key=v1,v2,...; got {0:?}")]
    Syntax(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub profile: NetProfile,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ScenarioReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Expands `lat=10,50,100` into copies of `base` with that key varied.
pub fn vary(base: &NetProfile, spec: &str) -> Result<Vec<NetProfile>, SweepError> {
    let (key, values) = spec.split_once('=').ok_or_else(|| SweepError::Syntax(spec.into()))?;
    let mut out = Vec::new();
    for v in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
        let mut p = base.clone();
        p.set(key.trim(), v)?;
        p.validate()?;
        out.push(p);
    }
    if out.is_empty() {
        return Err(SweepError::Syntax(spec.into()));
    }
    Ok(out)
}

/// One row per profile, in input order. Cells run on separate threads;
/// a failing cell is reported in its row and does not stop the others.
pub fn sweep(profiles: &[NetProfile], scenario: &Scenario) -> Result<Vec<SweepRow>, SweepError> {
    if profiles.is_empty() {
        return Err(SweepError::NoProfiles);
    }
    let rows = std::thread::scope(|s| {
        let handles: Vec<_> = profiles
            .iter()
            .map(|p| s.spawn(move || run_scenario(scenario, p)))
            .collect();
        handles
            .into_iter()
            .zip(profiles)
            .map(|(h, p)| {
                let result = h.join().unwrap_or_else(|_| panic!("sweep cell {p} panicked"));
                match result {
                    Ok(r) => SweepRow {
                        profile: p.clone(),
                        report: Some(r),
                        error: None,
                    },
                    Err(e) => SweepRow {
                        profile: p.clone(),
                        report: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    Ok(rows)
}

fn cell(v: Option<u64>) -> String {
    v.map_or_else(|| "-".into(), |v| v.to_string())
}

pub fn render_table(rows: &[SweepRow]) -> String {
    let header = [
        "lat",
        "jit",
        "loss",
        "seed",
        "converged",
        "conv_ms",
        "p50",
        "p95",
        "max",
        "frames",
        "lost",
        "bytes",
    ];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in rows {
        let p = &r.profile;
        let mut line = vec![
            p.latency_ms.to_string(),
            p.jitter_ms.to_string(),
            p.loss_rate.to_string(),
            p.seed.to_string(),
        ];
        match (&r.report, &r.error) {
            (Some(rep), _) => line.extend([
                if rep.converged { "yes" } else { "no" }.to_string(),
                cell(rep.convergence_time_ms),
                cell(rep.latency.p50),
                cell(rep.latency.p95),
                cell(rep.latency.max),
                rep.delivered_total().to_string(),
                rep.lost_total().to_string(),
                rep.bytes_on_wire.to_string(),
            ]),
            (None, err) => line.push(format!("error: {}", err.as_deref().unwrap_or("?"))),
        }
        cells.push(line);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            cells
                .iter()
                .filter_map(|r| r.get(c))
                .map(String::len)
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in &cells {
        let padded: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, v)| format!("{v:>w$}", w = widths.get(c).copied().unwrap_or(0)))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    }
    out
}

pub fn rows_to_json(rows: &[SweepRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}
