//! Headless peer for shared viewing sessions.
//!
//! [`PeerSession`] holds all peer logic without doing any I/O. The
//! [`client`] module drives it over a WebSocket; the simulator drives it
//! directly on a virtual clock.

pub mod client;
pub mod runner;
pub mod script;
pub mod session;
pub mod transcript;

pub use client::{connect, Client, ClientError, ClientOptions};
pub use runner::{encode_outgoing, perform, run_offline, ActionError, ScriptRunner};
pub use script::{Action, ActionScript, ScriptError, TimedAction};
pub use session::{ChatLine, PeerSession, ReceivedFile, SessionError, SessionOptions, SessionStats, Traffic};
pub use transcript::{Event, Transcript};
