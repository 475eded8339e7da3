//! Deterministic simulator for shared viewing sessions.
//!
//! Runs several [`molsync_peer::PeerSession`]s against an in-process
//! [`molsync_relay::Relay`] over a simulated network and reports latency,
//! traffic and whether everyone ended up looking at the same thing.

pub mod engine;
pub mod profile;
pub mod report;
pub mod scenario;
pub mod sweep;

pub use engine::{run_scenario, DeliveryRecord, SimError, Simulation, CONVERGENCE_TOLERANCE};
pub use profile::{LossScope, NetProfile, ProfileError};
pub use report::{percentile, LatencySummary, PeerReport, ScenarioReport};
pub use scenario::{PeerSpec, Scenario, ScenarioError, DEFAULT_EVENT_BUDGET};
pub use sweep::{render_table, rows_to_json, sweep, vary, SweepError, SweepRow};
