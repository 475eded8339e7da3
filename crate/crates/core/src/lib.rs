//! Protocol core for shared molecular viewing sessions.
//!
//! Peers exchange small JSON envelopes carrying camera snapshots, opaque
//! viewer commands, chat and chunked files. Everything here is pure: no I/O,
//! no clocks, no global state. Randomness and time are passed in.

pub mod coalesce;
pub mod codec;
pub mod envelope;
pub mod file;
pub mod id;
pub mod policy;
pub mod quat;
#[cfg(feature = "testing")]
pub mod strategies;
pub mod view;

pub use coalesce::{coalesce, Coalescer, DEFAULT_MAX_RATE};
pub use codec::{decode_envelope, decode_str, encode_envelope, DecodeError};
pub use envelope::{
    Center, CommandFrame, Envelope, FieldError, Kind, Payload, Recipient, RotationFrame, Script, StateFrame, Zoom,
    MAX_SCRIPT_BYTES, PROTOCOL_VERSION, SMALL_FRAME_BYTES,
};
pub use file::{chunk_file, reassemble, FileAssembler, FileChunk, FileError, FileId, FileManifest, DEFAULT_CHUNK_SIZE};
pub use id::{entropy_rng, new_peer_id, seeded_rng, IdRng, PeerId};
pub use policy::{gate_inbound, gate_outbound, Policy};
pub use quat::{compose_rotation, MathError, Quaternion, UnitQuaternion};
pub use view::{apply_update, Command, ViewState, ViewerModel};
