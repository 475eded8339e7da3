//! Camera snapshots, commands and the receiving viewer model.

use std::collections::BTreeMap;

use crate::envelope::{
    Center, CommandFrame, Envelope, FieldError, Payload, Recipient, RotationFrame, Script, StateFrame, Zoom,
};
use crate::id::PeerId;
use crate::policy::{gate_inbound, Policy};
use crate::quat::{MathError, Quaternion, UnitQuaternion};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ViewError {
    #[error(transparent)]
    Orientation(#[from] MathError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Absolute camera snapshot from one sender.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewState {
    pub orientation: UnitQuaternion,
    pub zoom: Zoom,
    pub center: Center,
    pub seq: u64,
    pub origin: PeerId,
}

impl ViewState {
    /// Renormalizes the orientation and validates zoom and center.
    pub fn new(
        orientation: Quaternion,
        zoom: f64,
        center: [f64; 3],
        seq: u64,
        origin: PeerId,
    ) -> Result<Self, ViewError> {
        Ok(Self {
            orientation: UnitQuaternion::normalize(orientation)?,
            zoom: Zoom::new(zoom)?,
            center: Center::new(center)?,
            seq,
            origin,
        })
    }

    pub fn rotation_envelope(&self, to: Recipient, ts: u64) -> Envelope {
        let frame = RotationFrame::new(self.orientation, 0).expect("hop 0");
        Envelope::new(self.origin.clone(), to, self.seq, ts, Payload::Rotation(frame))
    }

    pub fn state_envelope(&self, to: Recipient, ts: u64) -> Envelope {
        let frame = StateFrame::new(self.orientation, self.zoom, self.center, 0).expect("hop 0");
        Envelope::new(self.origin.clone(), to, self.seq, ts, Payload::State(frame))
    }

    /// Reads the snapshot carried by a state envelope.
    pub fn from_envelope(e: &Envelope) -> Option<ViewState> {
        match &e.payload {
            Payload::State(f) => Some(ViewState {
                orientation: f.orientation,
                zoom: f.zoom,
                center: f.center,
                seq: e.seq,
                origin: e.from.clone(),
            }),
            _ => None,
        }
    }
}

/// A viewer script issued by one peer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub script: Script,
    pub seq: u64,
    pub origin: PeerId,
}

impl Command {
    pub fn new(script: impl Into<String>, seq: u64, origin: PeerId) -> Result<Self, FieldError> {
        Ok(Self {
            script: Script::new(script)?,
            seq,
            origin,
        })
    }

    pub fn envelope(&self, to: Recipient, ts: u64) -> Envelope {
        let frame = CommandFrame::new(self.script.clone(), 0).expect("hop 0");
        Envelope::new(self.origin.clone(), to, self.seq, ts, Payload::Command(frame))
    }
}

/// Local visualization state of one peer.
///
/// Camera updates and commands are sequenced separately per origin: camera
/// snapshots may be dropped or overtaken, but every command must be applied,
/// so a late command is never rejected just because a newer snapshot from the
/// same sender got there first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ViewerModel {
    pub orientation: UnitQuaternion,
    pub zoom: Zoom,
    pub center: Center,
    /// Highest applied camera-update seq per origin.
    pub last_applied_seq: BTreeMap<PeerId, u64>,
    /// Highest applied command seq per origin.
    pub last_command_seq: BTreeMap<PeerId, u64>,
    pub command_log: Vec<String>,
}

impl ViewerModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies a rotation, state or command envelope in place. Returns
    /// whether anything changed; gated, stale and non-view envelopes are
    /// silent no-ops.
    pub fn apply(&mut self, e: &Envelope, policy: &Policy) -> bool {
        if !e.kind().is_view_update() || !gate_inbound(e.kind(), policy) {
            return false;
        }
        let seqs = match e.payload {
            Payload::Command(_) => &mut self.last_command_seq,
            _ => &mut self.last_applied_seq,
        };
        if seqs.get(&e.from).is_some_and(|&last| e.seq <= last) {
            return false;
        }
        seqs.insert(e.from.clone(), e.seq);
        match &e.payload {
            Payload::Rotation(f) => self.orientation = f.orientation,
            Payload::State(f) => {
                self.orientation = f.orientation;
                self.zoom = f.zoom;
                self.center = f.center;
            }
            Payload::Command(f) => self.command_log.push(f.script.as_str().to_owned()),
            _ => unreachable!("filtered by is_view_update"),
        }
        true
    }

    /// True when orientation, zoom and center agree within `tol`.
    pub fn camera_matches(&self, other: &ViewerModel, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol;
        self.orientation
            .to_array()
            .iter()
            .zip(other.orientation.to_array())
            .all(|(a, b)| close(*a, b))
            && close(self.zoom.get(), other.zoom.get())
            && self
                .center
                .get()
                .iter()
                .zip(other.center.get())
                .all(|(a, b)| close(*a, b))
    }
}

/// Pure form of [`ViewerModel::apply`].
pub fn apply_update(model: &ViewerModel, e: &Envelope, policy: &Policy) -> (ViewerModel, bool) {
    let mut next = model.clone();
    let applied = next.apply(e, policy);
    (next, applied)
}
