//! Typed wire messages.

use std::fmt;
use std::str::FromStr;

use crate::file::{FileChunk, FileId, FileManifest};
use crate::id::PeerId;
use crate::policy::Policy;
use crate::quat::UnitQuaternion;

/// Protocol version written into every envelope.
pub const PROTOCOL_VERSION: u8 = 1;

/// Largest accepted command script, in bytes of UTF-8.
pub const MAX_SCRIPT_BYTES: usize = 65536;

/// Upper bound on the encoded size of rotation and state envelopes, and of
/// command envelopes whose script is short enough to qualify as a small
/// text update.
pub const SMALL_FRAME_BYTES: usize = 512;

/// Highest hop value: 0 for an original update, 1 for a hub re-share.
pub const MAX_HOP: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Hello,
    Welcome,
    Connect,
    ConnectOk,
    PeerJoined,
    PeerLeft,
    Rotation,
    State,
    Command,
    Chat,
    FileManifest,
    FileChunk,
    FileAck,
    Error,
}

impl Kind {
    pub const ALL: [Kind; 14] = [
        Kind::Hello,
        Kind::Welcome,
        Kind::Connect,
        Kind::ConnectOk,
        Kind::PeerJoined,
        Kind::PeerLeft,
        Kind::Rotation,
        Kind::State,
        Kind::Command,
        Kind::Chat,
        Kind::FileManifest,
        Kind::FileChunk,
        Kind::FileAck,
        Kind::Error,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Hello => "hello",
            Kind::Welcome => "welcome",
            Kind::Connect => "connect",
            Kind::ConnectOk => "connect_ok",
            Kind::PeerJoined => "peer_joined",
            Kind::PeerLeft => "peer_left",
            Kind::Rotation => "rotation",
            Kind::State => "state",
            Kind::Command => "command",
            Kind::Chat => "chat",
            Kind::FileManifest => "file_manifest",
            Kind::FileChunk => "file_chunk",
            Kind::FileAck => "file_ack",
            Kind::Error => "error",
        }
    }

    /// Rotation and state frames: absolute camera snapshots that a newer one
    /// fully supersedes, so losing one is harmless.
    pub fn is_snapshot(self) -> bool {
        matches!(self, Kind::Rotation | Kind::State)
    }

    /// Kinds that carry a `hop` marker and go through last-writer-wins.
    pub fn is_view_update(self) -> bool {
        matches!(self, Kind::Rotation | Kind::State | Kind::Command)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown kind {0:?}")]
pub struct UnknownKind(pub String);

impl FromStr for Kind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownKind(s.to_owned()))
    }
}

/// Destination of an envelope: one peer, or every peer linked to the sender.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Recipient {
    Peer(PeerId),
    Broadcast,
}

impl Recipient {
    pub const BROADCAST_MARKER: &'static str = "*";

    pub fn peer(&self) -> Option<&PeerId> {
        match self {
            Recipient::Peer(p) => Some(p),
            Recipient::Broadcast => None,
        }
    }
}

impl fmt::Display for Recipient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recipient::Peer(p) => p.fmt(f),
            Recipient::Broadcast => f.write_str(Self::BROADCAST_MARKER),
        }
    }
}

impl From<PeerId> for Recipient {
    fn from(p: PeerId) -> Self {
        Recipient::Peer(p)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("zoom must be positive and finite, got {0}")]
    Zoom(f64),
    #[error("center components must be finite")]
    Center,
    #[error("script is {0} bytes, limit is {MAX_SCRIPT_BYTES}")]
    ScriptTooLong(usize),
    #[error("hop {0} exceeds {MAX_HOP}")]
    Hop(u8),
}

/// Zoom in percent of the default view (100 = default).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Zoom(f64);

impl Zoom {
    pub const DEFAULT: Zoom = Zoom(100.0);

    pub fn new(percent: f64) -> Result<Self, FieldError> {
        if percent.is_finite() && percent > 0.0 {
            Ok(Zoom(percent))
        } else {
            Err(FieldError::Zoom(percent))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Zoom {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Rotation center in model coordinates (Å).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Center([f64; 3]);

impl Center {
    pub const ORIGIN: Center = Center([0.0; 3]);

    pub fn new(xyz: [f64; 3]) -> Result<Self, FieldError> {
        if xyz.iter().all(|c| c.is_finite()) {
            Ok(Center(xyz))
        } else {
            Err(FieldError::Center)
        }
    }

    pub fn get(self) -> [f64; 3] {
        self.0
    }
}

/// Viewer script text. Opaque to the protocol: never parsed, never run by
/// the relay.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Script(String);

impl Script {
    pub fn new(text: impl Into<String>) -> Result<Self, FieldError> {
        let text = text.into();
        if text.len() > MAX_SCRIPT_BYTES {
            return Err(FieldError::ScriptTooLong(text.len()));
        }
        Ok(Script(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn check_hop(hop: u8) -> Result<u8, FieldError> {
    if hop <= MAX_HOP {
        Ok(hop)
    } else {
        Err(FieldError::Hop(hop))
    }
}

/// Orientation-only snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationFrame {
    pub orientation: UnitQuaternion,
    hop: u8,
}

impl RotationFrame {
    pub fn new(orientation: UnitQuaternion, hop: u8) -> Result<Self, FieldError> {
        Ok(Self {
            orientation,
            hop: check_hop(hop)?,
        })
    }

    pub fn hop(&self) -> u8 {
        self.hop
    }
}

/// Full camera snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFrame {
    pub orientation: UnitQuaternion,
    pub zoom: Zoom,
    pub center: Center,
    hop: u8,
}

impl StateFrame {
    pub fn new(orientation: UnitQuaternion, zoom: Zoom, center: Center, hop: u8) -> Result<Self, FieldError> {
        Ok(Self {
            orientation,
            zoom,
            center,
            hop: check_hop(hop)?,
        })
    }

    pub fn hop(&self) -> u8 {
        self.hop
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandFrame {
    pub script: Script,
    hop: u8,
}

impl CommandFrame {
    pub fn new(script: Script, hop: u8) -> Result<Self, FieldError> {
        Ok(Self {
            script,
            hop: check_hop(hop)?,
        })
    }

    pub fn hop(&self) -> u8 {
        self.hop
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Sent by a fresh connection. May carry the sender's policy so the
    /// relay can show it.
    Hello {
        policy: Option<Policy>,
    },
    Welcome {
        id: PeerId,
    },
    Connect {
        target: PeerId,
    },
    ConnectOk {
        peer: PeerId,
    },
    PeerJoined {
        peer: PeerId,
    },
    PeerLeft {
        peer: PeerId,
    },
    Rotation(RotationFrame),
    State(StateFrame),
    Command(CommandFrame),
    Chat {
        text: String,
    },
    FileManifest(FileManifest),
    FileChunk(FileChunk),
    FileAck {
        file_id: FileId,
        ok: bool,
    },
    Error {
        code: String,
        message: String,
    },
}

impl Payload {
    pub fn kind(&self) -> Kind {
        match self {
            Payload::Hello { .. } => Kind::Hello,
            Payload::Welcome { .. } => Kind::Welcome,
            Payload::Connect { .. } => Kind::Connect,
            Payload::ConnectOk { .. } => Kind::ConnectOk,
            Payload::PeerJoined { .. } => Kind::PeerJoined,
            Payload::PeerLeft { .. } => Kind::PeerLeft,
            Payload::Rotation(_) => Kind::Rotation,
            Payload::State(_) => Kind::State,
            Payload::Command(_) => Kind::Command,
            Payload::Chat { .. } => Kind::Chat,
            Payload::FileManifest(_) => Kind::FileManifest,
            Payload::FileChunk(_) => Kind::FileChunk,
            Payload::FileAck { .. } => Kind::FileAck,
            Payload::Error { .. } => Kind::Error,
        }
    }

    /// Hop marker of rotation/state/command payloads.
    pub fn hop(&self) -> Option<u8> {
        match self {
            Payload::Rotation(f) => Some(f.hop),
            Payload::State(f) => Some(f.hop),
            Payload::Command(f) => Some(f.hop),
            _ => None,
        }
    }

    /// Copy of a view update marked as re-shared by a hub.
    pub fn reshared(&self) -> Option<Payload> {
        let mut p = self.clone();
        match &mut p {
            Payload::Rotation(f) => f.hop = 1,
            Payload::State(f) => f.hop = 1,
            Payload::Command(f) => f.hop = 1,
            _ => return None,
        }
        Some(p)
    }

    pub fn error(code: &str, message: impl Into<String>) -> Payload {
        Payload::Error {
            code: code.to_owned(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub version: u8,
    pub from: PeerId,
    pub to: Recipient,
    /// Per-sender sequence number.
    pub seq: u64,
    /// Sender wall clock in ms since the epoch. Diagnostic only; never used
    /// for ordering.
    pub ts: u64,
    pub payload: Payload,
}

impl Envelope {
    pub fn new(from: PeerId, to: impl Into<Recipient>, seq: u64, ts: u64, payload: Payload) -> Self {
        Self {
            version: PROTOCOL_VERSION,
            from,
            to: to.into(),
            seq,
            ts,
            payload,
        }
    }

    pub fn kind(&self) -> Kind {
        self.payload.kind()
    }

    /// True for rotation/state/command envelopes that have not been re-shared.
    pub fn is_original_update(&self) -> bool {
        self.payload.hop() == Some(0)
    }
}
