//! JSON wire codec.
//!
//! One envelope is one UTF-8 JSON object with the keys `v`, `kind`, `from`,
//! `to`, `seq`, `ts`, `payload`, always written in that order so identical
//! envelopes encode to identical bytes. Binary file data is standard base64.
//! Quaternion components never carry more than nine significant digits (see
//! [`crate::quat`]).

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::envelope::{
    Center, CommandFrame, Envelope, FieldError, Kind, Payload, Recipient, RotationFrame, Script, StateFrame, Zoom,
    PROTOCOL_VERSION,
};
use crate::file::{FileChunk, FileId, FileManifest};
use crate::id::PeerId;
use crate::policy::Policy;
use crate::quat::{Quaternion, UnitQuaternion};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("malformed envelope: {0}")]
    Malformed(String),
    #[error("unknown kind {0:?}")]
    UnknownKind(String),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u64),
    #[error("field {field} out of range: {reason}")]
    FieldOutOfRange { field: &'static str, reason: String },
}

impl DecodeError {
    /// Stable short name used in `error` envelopes.
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::Malformed(_) => "malformed",
            DecodeError::UnknownKind(_) => "unknown_kind",
            DecodeError::UnsupportedVersion(_) => "unsupported_version",
            DecodeError::FieldOutOfRange { .. } => "field_out_of_range",
        }
    }
}

fn out_of_range(field: &'static str, reason: impl ToString) -> DecodeError {
    DecodeError::FieldOutOfRange {
        field,
        reason: reason.to_string(),
    }
}

#[derive(Serialize, Deserialize)]
struct HelloWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    policy: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct IdWire {
    id: String,
}

#[derive(Serialize, Deserialize)]
struct TargetWire {
    target: String,
}

#[derive(Serialize, Deserialize)]
struct PeerWire {
    peer: String,
}

#[derive(Serialize, Deserialize)]
struct RotationWire {
    q: [f64; 4],
    #[serde(default)]
    hop: u8,
}

#[derive(Serialize, Deserialize)]
struct StateWire {
    q: [f64; 4],
    zoom: f64,
    center: [f64; 3],
    #[serde(default)]
    hop: u8,
}

#[derive(Serialize, Deserialize)]
struct CommandWire {
    script: String,
    #[serde(default)]
    hop: u8,
}

#[derive(Serialize, Deserialize)]
struct ChatWire {
    text: String,
}

#[derive(Serialize, Deserialize)]
struct ManifestWire {
    file_id: String,
    name: String,
    total_bytes: u64,
    chunk_size: u64,
    chunk_count: u64,
    digest: String,
}

#[derive(Serialize, Deserialize)]
struct ChunkWire {
    file_id: String,
    index: u64,
    data: String,
}

#[derive(Serialize, Deserialize)]
struct AckWire {
    file_id: String,
    ok: bool,
}

#[derive(Serialize, Deserialize)]
struct ErrorWire {
    code: String,
    message: String,
}

#[derive(Serialize)]
struct EnvelopeWire<'a> {
    v: u8,
    kind: &'static str,
    from: &'a str,
    to: String,
    seq: u64,
    ts: u64,
    payload: Value,
}

fn to_value<T: Serialize>(t: T) -> Value {
    serde_json::to_value(t).expect("wire structs serialize")
}

fn payload_value(p: &Payload) -> Value {
    match p {
        Payload::Hello { policy } => to_value(HelloWire {
            policy: policy.map(|p| p.to_string()),
        }),
        Payload::Welcome { id } => to_value(IdWire { id: id.to_string() }),
        Payload::Connect { target } => to_value(TargetWire {
            target: target.to_string(),
        }),
        Payload::ConnectOk { peer } | Payload::PeerJoined { peer } | Payload::PeerLeft { peer } => {
            to_value(PeerWire { peer: peer.to_string() })
        }
        Payload::Rotation(f) => to_value(RotationWire {
            q: f.orientation.canonical().to_array(),
            hop: f.hop(),
        }),
        Payload::State(f) => to_value(StateWire {
            q: f.orientation.canonical().to_array(),
            zoom: f.zoom.get(),
            center: f.center.get(),
            hop: f.hop(),
        }),
        Payload::Command(f) => to_value(CommandWire {
            script: f.script.as_str().to_owned(),
            hop: f.hop(),
        }),
        Payload::Chat { text } => to_value(ChatWire { text: text.clone() }),
        Payload::FileManifest(m) => to_value(ManifestWire {
            file_id: m.file_id.to_string(),
            name: m.name.clone(),
            total_bytes: m.total_bytes,
            chunk_size: m.chunk_size,
            chunk_count: m.chunk_count,
            digest: m.digest_hex(),
        }),
        Payload::FileChunk(c) => to_value(ChunkWire {
            file_id: c.file_id.to_string(),
            index: c.index,
            data: BASE64.encode(&c.data),
        }),
        Payload::FileAck { file_id, ok } => to_value(AckWire {
            file_id: file_id.to_string(),
            ok: *ok,
        }),
        Payload::Error { code, message } => to_value(ErrorWire {
            code: code.clone(),
            message: message.clone(),
        }),
    }
}

/// Encodes an envelope as UTF-8 JSON text.
pub fn encode_envelope(e: &Envelope) -> String {
    // serde_json keeps struct field order, and the payload maps are built
    // from structs too, so output is deterministic.
    let wire = EnvelopeWire {
        v: e.version,
        kind: e.kind().as_str(),
        from: e.from.as_str(),
        to: e.to.to_string(),
        seq: e.seq,
        ts: e.ts,
        payload: payload_value(&e.payload),
    };
    serde_json::to_string(&wire).expect("envelope serializes")
}

fn field<'a>(obj: &'a Map<String, Value>, name: &'static str) -> Result<&'a Value, DecodeError> {
    obj.get(name)
        .ok_or_else(|| DecodeError::Malformed(format!("missing field `{name}`")))
}

fn u64_field(obj: &Map<String, Value>, name: &'static str) -> Result<u64, DecodeError> {
    match field(obj, name)? {
        Value::Number(n) => n
            .as_u64()
            .ok_or_else(|| out_of_range(name, format!("{n} is not an unsigned 64-bit integer"))),
        _ => Err(DecodeError::Malformed(format!("`{name}` is not a number"))),
    }
}

fn str_field<'a>(obj: &'a Map<String, Value>, name: &'static str) -> Result<&'a str, DecodeError> {
    field(obj, name)?
        .as_str()
        .ok_or_else(|| DecodeError::Malformed(format!("`{name}` is not a string")))
}

fn peer_id(field: &'static str, s: &str) -> Result<PeerId, DecodeError> {
    s.parse().map_err(|e| out_of_range(field, e))
}

fn file_id(s: &str) -> Result<FileId, DecodeError> {
    FileId::parse(s).map_err(|e| out_of_range("file_id", e))
}

fn typed<T: DeserializeOwned>(kind: Kind, v: Value) -> Result<T, DecodeError> {
    serde_json::from_value(v).map_err(|e| DecodeError::Malformed(format!("{kind} payload: {e}")))
}

fn orientation(q: [f64; 4]) -> Result<UnitQuaternion, DecodeError> {
    UnitQuaternion::normalize(Quaternion::new(q[0], q[1], q[2], q[3]))
        .map(|q| q.canonical())
        .map_err(|e| out_of_range("q", e))
}

fn frame_err(field: &'static str) -> impl Fn(FieldError) -> DecodeError {
    move |e| out_of_range(field, e)
}

fn decode_payload(kind: Kind, v: Value) -> Result<Payload, DecodeError> {
    Ok(match kind {
        Kind::Hello => {
            let w: HelloWire = typed(kind, v)?;
            let policy = w
                .policy
                .map(|s| s.parse::<Policy>())
                .transpose()
                .map_err(|e| out_of_range("policy", e))?;
            Payload::Hello { policy }
        }
        Kind::Welcome => {
            let w: IdWire = typed(kind, v)?;
            Payload::Welcome {
                id: peer_id("id", &w.id)?,
            }
        }
        Kind::Connect => {
            let w: TargetWire = typed(kind, v)?;
            Payload::Connect {
                target: peer_id("target", &w.target)?,
            }
        }
        Kind::ConnectOk | Kind::PeerJoined | Kind::PeerLeft => {
            let w: PeerWire = typed(kind, v)?;
            let peer = peer_id("peer", &w.peer)?;
            match kind {
                Kind::ConnectOk => Payload::ConnectOk { peer },
                Kind::PeerJoined => Payload::PeerJoined { peer },
                _ => Payload::PeerLeft { peer },
            }
        }
        Kind::Rotation => {
            let w: RotationWire = typed(kind, v)?;
            Payload::Rotation(RotationFrame::new(orientation(w.q)?, w.hop).map_err(frame_err("hop"))?)
        }
        Kind::State => {
            let w: StateWire = typed(kind, v)?;
            Payload::State(
                StateFrame::new(
                    orientation(w.q)?,
                    Zoom::new(w.zoom).map_err(frame_err("zoom"))?,
                    Center::new(w.center).map_err(frame_err("center"))?,
                    w.hop,
                )
                .map_err(frame_err("hop"))?,
            )
        }
        Kind::Command => {
            let w: CommandWire = typed(kind, v)?;
            let script = Script::new(w.script).map_err(frame_err("script"))?;
            Payload::Command(CommandFrame::new(script, w.hop).map_err(frame_err("hop"))?)
        }
        Kind::Chat => {
            let w: ChatWire = typed(kind, v)?;
            Payload::Chat { text: w.text }
        }
        Kind::FileManifest => {
            let w: ManifestWire = typed(kind, v)?;
            let digest = hex::decode(&w.digest)
                .ok()
                .and_then(|d| <[u8; 32]>::try_from(d).ok())
                .ok_or_else(|| out_of_range("digest", "expected 64 hex digits"))?;
            let m = FileManifest {
                file_id: file_id(&w.file_id)?,
                name: w.name,
                total_bytes: w.total_bytes,
                chunk_size: w.chunk_size,
                chunk_count: w.chunk_count,
                digest,
            };
            m.validate().map_err(|e| out_of_range("chunk_count", e))?;
            Payload::FileManifest(m)
        }
        Kind::FileChunk => {
            let w: ChunkWire = typed(kind, v)?;
            let data = BASE64.decode(w.data.as_bytes()).map_err(|e| out_of_range("data", e))?;
            Payload::FileChunk(FileChunk {
                file_id: file_id(&w.file_id)?,
                index: w.index,
                data,
            })
        }
        Kind::FileAck => {
            let w: AckWire = typed(kind, v)?;
            Payload::FileAck {
                file_id: file_id(&w.file_id)?,
                ok: w.ok,
            }
        }
        Kind::Error => {
            let w: ErrorWire = typed(kind, v)?;
            Payload::Error {
                code: w.code,
                message: w.message,
            }
        }
    })
}

/// Decodes one frame. Never panics, whatever the input.
pub fn decode_envelope(bytes: &[u8]) -> Result<Envelope, DecodeError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| DecodeError::Malformed(e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(DecodeError::Malformed("not a JSON object".into()));
    };
    let version = u64_field(&obj, "v")?;
    if version != u64::from(PROTOCOL_VERSION) {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let kind_text = str_field(&obj, "kind")?;
    let kind: Kind = kind_text
        .parse()
        .map_err(|_| DecodeError::UnknownKind(kind_text.to_owned()))?;
    let from = peer_id("from", str_field(&obj, "from")?)?;
    let to = match str_field(&obj, "to")? {
        Recipient::BROADCAST_MARKER => Recipient::Broadcast,
        s => Recipient::Peer(peer_id("to", s)?),
    };
    let seq = u64_field(&obj, "seq")?;
    let ts = u64_field(&obj, "ts")?;
    let payload = obj
        .remove("payload")
        .ok_or_else(|| DecodeError::Malformed("missing field `payload`".into()))?;
    if !payload.is_object() {
        return Err(DecodeError::Malformed("`payload` is not an object".into()));
    }
    Ok(Envelope {
        version: PROTOCOL_VERSION,
        from,
        to,
        seq,
        ts,
        payload: decode_payload(kind, payload)?,
    })
}

/// Decodes a text frame.
pub fn decode_str(text: &str) -> Result<Envelope, DecodeError> {
    decode_envelope(text.as_bytes())
}
