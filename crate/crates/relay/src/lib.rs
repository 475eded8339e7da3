//! Message relay for shared viewing sessions.
//!
//! The relay hands out peer ids, keeps the set of links peers have asked
//! for, and forwards envelopes along those links without looking inside
//! payloads. Topology is entirely up to the peers: a "master" is just a peer
//! others happened to connect to.

pub mod queue;
pub mod registry;
pub mod server;

pub use queue::{OutboundQueue, PushOutcome};
pub use registry::{codes, Delivery, DropReason, DropRecord, Link, PeerEntry, Relay, RelayConfig, RouteDecision};
pub use server::{app, serve, ServerConfig};
