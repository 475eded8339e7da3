//! Run summaries.

use std::collections::BTreeMap;

use molsync_peer::SessionStats;
use serde::Serialize;

use crate::profile::NetProfile;

/// Nearest-rank percentiles over end-to-end apply latencies in ms.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LatencySummary {
    pub samples: usize,
    pub p50: Option<u64>,
    pub p95: Option<u64>,
    pub max: Option<u64>,
}

pub fn percentile(sorted: &[u64], p: f64) -> Option<u64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

impl LatencySummary {
    pub fn of(samples: &[u64]) -> Self {
        let mut v = samples.to_vec();
        v.sort_unstable();
        Self {
            samples: v.len(),
            p50: percentile(&v, 50.0),
            p95: percentile(&v, 95.0),
            max: v.last().copied(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeerReport {
    pub name: String,
    pub id: String,
    pub hub: bool,
    pub links: usize,
    pub departed: bool,
    pub latency: LatencySummary,
    pub commands: usize,
    pub chat_lines: usize,
    pub stats: SessionStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub profile: NetProfile,
    pub converged: bool,
    /// From the last original view update sent to the last one applied.
    pub convergence_time_ms: Option<u64>,
    pub end_time_ms: u64,
    pub events: u64,
    pub latency: LatencySummary,
    /// Frames handed to peers, per kind.
    pub delivered: BTreeMap<&'static str, u64>,
    pub lost_in_network: BTreeMap<&'static str, u64>,
    pub relay_drops: u64,
    /// Sum of encoded lengths of delivered frames.
    pub bytes_on_wire: u64,
    pub max_view_frame_bytes: usize,
    pub view_frames_small: bool,
    pub peers: Vec<PeerReport>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn lost_total(&self) -> u64 {
        self.lost_in_network.values().sum()
    }

    pub fn delivered_total(&self) -> u64 {
        self.delivered.values().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<u64> = (1..=20).collect();
        assert_eq!(percentile(&v, 50.0), Some(10));
        assert_eq!(percentile(&v, 95.0), Some(19));
        assert_eq!(percentile(&v, 100.0), Some(20));
        assert_eq!(percentile(&[7], 95.0), Some(7));
        assert_eq!(percentile(&[], 50.0), None);
        let s = LatencySummary::of(&[5, 1, 3]);
        assert_eq!((s.p50, s.max, s.samples), (Some(3), Some(5), 3));
    }
}
