//! Sans-IO peer state.
//!
//! A [`PeerSession`] takes local actions and decoded envelopes and returns
//! the envelopes it wants sent. Time is always passed in, so the same code
//! runs against a WebSocket and inside the simulator.

use std::collections::{BTreeMap, BTreeSet};

use molsync_core::{
    chunk_file, decode_str, entropy_rng, gate_outbound, Center, Coalescer, CommandFrame, Envelope, FieldError,
    FileAssembler, FileError, FileId, FileManifest, IdRng, Kind, Payload, PeerId, Policy, Recipient, RotationFrame,
    Script, StateFrame, UnitQuaternion, ViewerModel, Zoom, DEFAULT_CHUNK_SIZE, DEFAULT_MAX_RATE,
};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    File(#[from] FileError),
}

/// Envelope counts and encoded bytes, per kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Traffic {
    pub frames: u64,
    pub bytes: u64,
    pub per_kind: BTreeMap<&'static str, u64>,
}

impl Traffic {
    pub fn record(&mut self, kind: Kind, bytes: usize) {
        self.frames += 1;
        self.bytes += bytes as u64;
        *self.per_kind.entry(kind.as_str()).or_default() += 1;
    }

    pub fn count(&self, kind: Kind) -> u64 {
        self.per_kind.get(kind.as_str()).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SessionStats {
    pub sent: Traffic,
    pub received: Traffic,
    pub decode_errors: u64,
    /// Inbound view updates that changed the model.
    pub applied: u64,
    pub reshared: u64,
    /// Local drags or commands withheld by the send policy.
    pub gated: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChatLine {
    pub from: PeerId,
    pub ts: u64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedFile {
    pub from: PeerId,
    pub manifest: FileManifest,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
enum Pending {
    Rotation(UnitQuaternion),
    State(UnitQuaternion, Zoom, Center),
}

#[derive(Debug, Clone)]
pub struct SessionOptions {
    pub policy: Policy,
    pub hub_mode: bool,
    pub max_rate: f64,
    pub chunk_size: u64,
    /// Seed for file ids. `None` draws from the OS.
    pub seed: Option<u64>,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            policy: Policy::default(),
            hub_mode: false,
            max_rate: DEFAULT_MAX_RATE,
            chunk_size: DEFAULT_CHUNK_SIZE,
            seed: None,
        }
    }
}

#[derive(Debug)]
pub struct PeerSession {
    id: PeerId,
    pub policy: Policy,
    pub model: ViewerModel,
    links: BTreeSet<PeerId>,
    pub hub_mode: bool,
    stats: SessionStats,
    chat: Vec<ChatLine>,
    errors: Vec<(String, String)>,
    acks: Vec<(FileId, bool)>,
    incoming: BTreeMap<FileId, (PeerId, FileAssembler)>,
    completed: Vec<ReceivedFile>,
    next_seq: u64,
    outbox: Coalescer<Pending>,
    chunk_size: u64,
    rng: IdRng,
    closed: bool,
    // Set once any state frame has left this session.
    sent_state: bool,
}

impl PeerSession {
    pub fn new(id: PeerId, opts: SessionOptions) -> Self {
        Self {
            id,
            policy: opts.policy,
            model: ViewerModel::new(),
            links: BTreeSet::new(),
            hub_mode: opts.hub_mode,
            stats: SessionStats::default(),
            chat: Vec::new(),
            errors: Vec::new(),
            acks: Vec::new(),
            incoming: BTreeMap::new(),
            completed: Vec::new(),
            next_seq: 1,
            outbox: Coalescer::new(opts.max_rate),
            chunk_size: opts.chunk_size,
            rng: opts.seed.map_or_else(entropy_rng, molsync_core::seeded_rng),
            closed: false,
            sent_state: false,
        }
    }

    pub fn id(&self) -> &PeerId {
        &self.id
    }

    pub fn links(&self) -> &BTreeSet<PeerId> {
        &self.links
    }

    pub fn stats(&self) -> &SessionStats {
        &self.stats
    }

    pub fn chat_log(&self) -> &[ChatLine] {
        &self.chat
    }

    /// `(code, message)` of every error envelope received.
    pub fn errors(&self) -> &[(String, String)] {
        &self.errors
    }

    pub fn file_acks(&self) -> &[(FileId, bool)] {
        &self.acks
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    /// Files that finished reassembly since the last call.
    pub fn take_completed_files(&mut self) -> Vec<ReceivedFile> {
        std::mem::take(&mut self.completed)
    }

    fn seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    fn envelope(&mut self, to: impl Into<Recipient>, ts: u64, payload: Payload) -> Envelope {
        let seq = self.seq();
        Envelope::new(self.id.clone(), to, seq, ts, payload)
    }

    /// Call for every envelope actually written to the transport.
    pub fn record_sent(&mut self, e: &Envelope, bytes: usize) {
        self.stats.sent.record(e.kind(), bytes);
    }

    pub fn connect(&mut self, target: PeerId, now: u64) -> Envelope {
        self.envelope(PeerId::server(), now, Payload::Connect { target })
    }

    pub fn set_policy(&mut self, policy: Policy) {
        self.policy = policy;
    }

    /// Marks the session closed and forgets its links.
    pub fn disconnect(&mut self) {
        self.closed = true;
        self.links.clear();
    }

    /// The local camera always follows the drag; sending is subject to the
    /// policy and the rate limit.
    pub fn local_drag(&mut self, orientation: UnitQuaternion, now: u64) -> Vec<Envelope> {
        // Hold the wire form so this view and every receiver agree exactly.
        let orientation = orientation.canonical();
        self.model.orientation = orientation;
        if !gate_outbound(Kind::Rotation, &self.policy) {
            self.stats.gated += 1;
            return Vec::new();
        }
        // A pending zoom must not be lost to a later rotation.
        let pending = match self.outbox.pending() {
            Some(Pending::State(..)) => Pending::State(orientation, self.model.zoom, self.model.center),
            _ => Pending::Rotation(orientation),
        };
        self.offer(pending, now)
    }

    pub fn local_zoom(&mut self, zoom: f64, now: u64) -> Result<Vec<Envelope>, SessionError> {
        self.model.zoom = Zoom::new(zoom)?;
        Ok(self.local_state(now))
    }

    pub fn local_center(&mut self, center: [f64; 3], now: u64) -> Result<Vec<Envelope>, SessionError> {
        self.model.center = Center::new(center)?;
        Ok(self.local_state(now))
    }

    fn local_state(&mut self, now: u64) -> Vec<Envelope> {
        if !gate_outbound(Kind::State, &self.policy) {
            self.stats.gated += 1;
            return Vec::new();
        }
        let m = &self.model;
        self.offer(Pending::State(m.orientation, m.zoom, m.center), now)
    }

    fn offer(&mut self, pending: Pending, now: u64) -> Vec<Envelope> {
        let out = self.outbox.offer(pending, now);
        out.into_iter().flat_map(|p| self.emit(p, now)).collect()
    }

    fn emit(&mut self, p: Pending, now: u64) -> Vec<Envelope> {
        // A rotation that overtook an earlier state from this sender would
        // make receivers drop that state's zoom and center, so after the
        // first state every camera update is a full state.
        let p = match p {
            Pending::Rotation(q) if self.sent_state => Pending::State(q, self.model.zoom, self.model.center),
            p => p,
        };
        // Emission reasserts the local view over anything received since.
        let payload = match p {
            Pending::Rotation(q) => {
                self.model.orientation = q;
                Payload::Rotation(RotationFrame::new(q, 0).expect("hop 0"))
            }
            Pending::State(q, z, c) => {
                self.model.orientation = q;
                self.model.zoom = z;
                self.model.center = c;
                self.sent_state = true;
                Payload::State(StateFrame::new(q, z, c, 0).expect("hop 0"))
            }
        };
        vec![self.envelope(Recipient::Broadcast, now, payload)]
    }

    /// Flushes a coalesced snapshot whose interval has elapsed.
    pub fn tick(&mut self, now: u64) -> Vec<Envelope> {
        if self.closed {
            return Vec::new();
        }
        match self.outbox.poll(now) {
            Some(p) => self.emit(p, now),
            None => Vec::new(),
        }
    }

    /// When [`tick`](Self::tick) next has something to send.
    pub fn next_deadline(&self) -> Option<u64> {
        self.outbox.deadline().filter(|_| !self.closed)
    }

    /// Applies the command locally and broadcasts it if allowed. Oversize
    /// scripts fail before anything changes.
    pub fn send_command(&mut self, text: &str, now: u64) -> Result<Vec<Envelope>, SessionError> {
        let script = Script::new(text)?;
        let seq = self.seq();
        self.model.command_log.push(script.as_str().to_owned());
        self.model.last_command_seq.insert(self.id.clone(), seq);
        if !gate_outbound(Kind::Command, &self.policy) {
            self.stats.gated += 1;
            return Ok(Vec::new());
        }
        let frame = CommandFrame::new(script, 0).expect("hop 0");
        Ok(vec![Envelope::new(
            self.id.clone(),
            Recipient::Broadcast,
            seq,
            now,
            Payload::Command(frame),
        )])
    }

    pub fn send_chat(&mut self, text: &str, now: u64) -> Vec<Envelope> {
        self.chat.push(ChatLine {
            from: self.id.clone(),
            ts: now,
            text: text.to_owned(),
        });
        vec![self.envelope(Recipient::Broadcast, now, Payload::Chat { text: text.to_owned() })]
    }

    /// Manifest followed by every chunk in index order.
    pub fn send_file(&mut self, name: &str, bytes: &[u8], now: u64) -> Result<Vec<Envelope>, SessionError> {
        let file_id = FileId::random(&mut self.rng);
        let (manifest, chunks) = chunk_file(bytes, self.chunk_size, name, file_id)?;
        let mut out = vec![self.envelope(Recipient::Broadcast, now, Payload::FileManifest(manifest))];
        for c in chunks {
            out.push(self.envelope(Recipient::Broadcast, now, Payload::FileChunk(c)));
        }
        Ok(out)
    }

    /// Decodes and handles one text frame. Undecodable frames are counted
    /// and otherwise ignored.
    pub fn on_frame(&mut self, text: &str, now: u64) -> Vec<Envelope> {
        match decode_str(text) {
            Ok(e) => self.on_receive(&e, text.len(), now),
            Err(_) => {
                self.stats.decode_errors += 1;
                Vec::new()
            }
        }
    }

    /// Handles one inbound envelope and returns any replies: hub re-shares
    /// and file acknowledgements.
    pub fn on_receive(&mut self, e: &Envelope, bytes: usize, now: u64) -> Vec<Envelope> {
        self.stats.received.record(e.kind(), bytes);
        match &e.payload {
            Payload::ConnectOk { peer } | Payload::PeerJoined { peer } => {
                self.links.insert(peer.clone());
                Vec::new()
            }
            Payload::PeerLeft { peer } => {
                self.links.remove(peer);
                Vec::new()
            }
            Payload::Error { code, message } => {
                self.errors.push((code.clone(), message.clone()));
                Vec::new()
            }
            Payload::Rotation(_) | Payload::State(_) | Payload::Command(_) => {
                let applied = self.model.apply(e, &self.policy);
                self.stats.applied += u64::from(applied);
                if applied && self.hub_mode && e.is_original_update() {
                    self.reshare(e)
                } else {
                    Vec::new()
                }
            }
            Payload::Chat { text } => {
                self.chat.push(ChatLine {
                    from: e.from.clone(),
                    ts: e.ts,
                    text: text.clone(),
                });
                Vec::new()
            }
            Payload::FileManifest(m) => {
                if let Ok(asm) = FileAssembler::new(m.clone()) {
                    self.incoming.insert(m.file_id.clone(), (e.from.clone(), asm));
                    if m.chunk_count == 0 {
                        return self.finish_file(&m.file_id, now);
                    }
                }
                Vec::new()
            }
            Payload::FileChunk(c) => {
                let Some((_, asm)) = self.incoming.get_mut(&c.file_id) else {
                    return Vec::new();
                };
                if asm.accept(c).is_ok() && asm.is_complete() {
                    let id = c.file_id.clone();
                    return self.finish_file(&id, now);
                }
                Vec::new()
            }
            Payload::FileAck { file_id, ok } => {
                self.acks.push((file_id.clone(), *ok));
                Vec::new()
            }
            Payload::Hello { .. } | Payload::Welcome { .. } | Payload::Connect { .. } => Vec::new(),
        }
    }

    fn finish_file(&mut self, id: &FileId, now: u64) -> Vec<Envelope> {
        let (from, asm) = self.incoming.remove(id).expect("known file");
        let ok = match asm.finish() {
            Ok(bytes) => {
                self.completed.push(ReceivedFile {
                    from: from.clone(),
                    manifest: asm.manifest().clone(),
                    bytes,
                });
                true
            }
            Err(_) => false,
        };
        vec![self.envelope(
            from,
            now,
            Payload::FileAck {
                file_id: id.clone(),
                ok,
            },
        )]
    }

    // One copy per link other than the sender. Copies carry the hub as
    // sender (the relay insists) and keep the original timestamp.
    fn reshare(&mut self, e: &Envelope) -> Vec<Envelope> {
        if !gate_outbound(e.kind(), &self.policy) {
            return Vec::new();
        }
        let targets: Vec<PeerId> = self.links.iter().filter(|l| **l != e.from).cloned().collect();
        if targets.is_empty() {
            return Vec::new();
        }
        let payload = e.payload.reshared().expect("view update");
        self.sent_state |= e.kind() == Kind::State;
        let seq = self.seq();
        self.stats.reshared += targets.len() as u64;
        targets
            .into_iter()
            .map(|t| Envelope::new(self.id.clone(), t, seq, e.ts, payload.clone()))
            .collect()
    }
}
