//! Proptest strategies for valid envelopes.

use proptest::collection::vec;
use proptest::prelude::*;

use crate::envelope::{Center, CommandFrame, Envelope, Payload, Recipient, RotationFrame, Script, StateFrame, Zoom};
use crate::file::{FileChunk, FileId, FileManifest};
use crate::id::PeerId;
use crate::policy::Policy;
use crate::quat::{Quaternion, UnitQuaternion};

pub fn peer_id() -> impl Strategy<Value = PeerId> {
    "[A-Za-z0-9]{16}".prop_map(|s| s.parse().expect("alphabet matches"))
}

pub fn file_id() -> impl Strategy<Value = FileId> {
    "[A-Za-z0-9]{16}".prop_map(|s| FileId::parse(&s).expect("alphabet matches"))
}

pub fn recipient() -> impl Strategy<Value = Recipient> {
    prop_oneof![1 => Just(Recipient::Broadcast), 3 => peer_id().prop_map(Recipient::Peer)]
}

/// Unit quaternions at full precision.
pub fn raw_unit_quaternion() -> impl Strategy<Value = UnitQuaternion> {
    [-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0]
        .prop_filter("non-degenerate", |c| c.iter().map(|v| v * v).sum::<f64>() > 1e-6)
        .prop_map(|c| UnitQuaternion::normalize(Quaternion::new(c[0], c[1], c[2], c[3])).expect("non-zero"))
}

/// Unit quaternions in wire form.
pub fn unit_quaternion() -> impl Strategy<Value = UnitQuaternion> {
    raw_unit_quaternion().prop_map(|q| q.canonical())
}

pub fn zoom() -> impl Strategy<Value = Zoom> {
    prop_oneof![1.0f64..1000.0, (f64::MIN_POSITIVE..f64::MAX), Just(100.0),]
        .prop_map(|z| Zoom::new(z).expect("positive"))
}

pub fn center() -> impl Strategy<Value = Center> {
    [-1e6f64..1e6, -1e6f64..1e6, -1e6f64..1e6].prop_map(|c| Center::new(c).expect("finite"))
}

/// Scripts short enough that the envelope stays a small frame.
pub fn short_script() -> impl Strategy<Value = Script> {
    "[ -~]{0,120}".prop_map(|s| Script::new(s).expect("short"))
}

pub fn rotation() -> impl Strategy<Value = Payload> {
    (unit_quaternion(), 0u8..=1).prop_map(|(q, hop)| Payload::Rotation(RotationFrame::new(q, hop).expect("hop")))
}

pub fn state() -> impl Strategy<Value = Payload> {
    (unit_quaternion(), zoom(), center(), 0u8..=1)
        .prop_map(|(q, z, c, hop)| Payload::State(StateFrame::new(q, z, c, hop).expect("hop")))
}

pub fn command() -> impl Strategy<Value = Payload> {
    (short_script(), 0u8..=1).prop_map(|(s, hop)| Payload::Command(CommandFrame::new(s, hop).expect("hop")))
}

fn manifest() -> impl Strategy<Value = FileManifest> {
    (file_id(), ".{0,40}", 0u64..1 << 40, 1u64..1 << 20, any::<[u8; 32]>()).prop_map(
        |(file_id, name, total_bytes, chunk_size, digest)| FileManifest {
            file_id,
            name,
            total_bytes,
            chunk_size,
            chunk_count: total_bytes.div_ceil(chunk_size),
            digest,
        },
    )
}

pub fn payload() -> impl Strategy<Value = Payload> {
    prop_oneof![
        proptest::option::of((0u8..64).prop_map(Policy::from_bits)).prop_map(|policy| Payload::Hello { policy }),
        peer_id().prop_map(|id| Payload::Welcome { id }),
        peer_id().prop_map(|target| Payload::Connect { target }),
        peer_id().prop_map(|peer| Payload::ConnectOk { peer }),
        peer_id().prop_map(|peer| Payload::PeerJoined { peer }),
        peer_id().prop_map(|peer| Payload::PeerLeft { peer }),
        rotation(),
        state(),
        command(),
        ".{0,200}".prop_map(|text| Payload::Chat { text }),
        manifest().prop_map(Payload::FileManifest),
        (file_id(), any::<u64>(), vec(any::<u8>(), 0..300))
            .prop_map(|(file_id, index, data)| Payload::FileChunk(FileChunk { file_id, index, data })),
        (file_id(), any::<bool>()).prop_map(|(file_id, ok)| Payload::FileAck { file_id, ok }),
        ("[a-z_]{1,20}", ".{0,80}").prop_map(|(code, message)| Payload::Error { code, message }),
    ]
}

pub fn envelope_with(payload: impl Strategy<Value = Payload>) -> impl Strategy<Value = Envelope> {
    (peer_id(), recipient(), any::<u64>(), any::<u64>(), payload)
        .prop_map(|(from, to, seq, ts, payload)| Envelope::new(from, to, seq, ts, payload))
}

pub fn envelope() -> impl Strategy<Value = Envelope> {
    envelope_with(payload())
}

/// Rotation, state and command envelopes only.
pub fn view_update() -> impl Strategy<Value = Envelope> {
    envelope_with(prop_oneof![rotation(), state(), command()])
}
