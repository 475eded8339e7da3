//! The relay's single source of truth: who is connected, who is linked to
//! whom, and where each envelope goes.
//!
//! [`Relay`] is a plain state machine. It takes decoded input and returns
//! [`Delivery`] values; it never touches a socket. The WebSocket server and
//! the simulator both drive it.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use molsync_core::id::{entropy_rng, seeded_rng, IdRng};
use molsync_core::{decode_str, encode_envelope, new_peer_id, Envelope, Kind, Payload, PeerId, Policy, Recipient};

pub const DEFAULT_MAX_PEERS: usize = 1024;

/// Error codes carried in `error` envelopes sent by the relay.
pub mod codes {
    pub const SERVER_FULL: &str = "server_full";
    pub const PEER_NOT_FOUND: &str = "peer_not_found";
    pub const SELF_CONNECT: &str = "self_connect";
    pub const NOT_LINKED: &str = "not_linked";
    pub const BAD_FROM: &str = "bad_from";
    pub const ALREADY_REGISTERED: &str = "already_registered";
    pub const UNEXPECTED_KIND: &str = "unexpected_kind";
    pub const BINARY_UNSUPPORTED: &str = "binary_unsupported";
}

/// An unordered pair of peers, stored smallest first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link(PeerId, PeerId);

impl Link {
    pub fn new(a: PeerId, b: PeerId) -> Self {
        if a <= b {
            Link(a, b)
        } else {
            Link(b, a)
        }
    }

    pub fn endpoints(&self) -> (&PeerId, &PeerId) {
        (&self.0, &self.1)
    }

    pub fn other(&self, p: &PeerId) -> Option<&PeerId> {
        if &self.0 == p {
            Some(&self.1)
        } else if &self.1 == p {
            Some(&self.0)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct PeerEntry<C> {
    pub conn: C,
    /// Policy announced in `hello`, if any. Informational; routing never
    /// looks at it.
    pub policy: Policy,
    pub joined_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    /// Broadcast from a peer with no links.
    NoLinks,
    /// Unicast to a registered peer that is not linked to the sender.
    NotLinked,
    /// Unicast to an id that is not registered.
    PeerNotFound,
    /// Unicast addressed to the sender itself.
    OriginExcluded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteDecision {
    pub recipients: Vec<PeerId>,
    pub drop_reason: Option<DropReason>,
}

impl RouteDecision {
    fn dropped(reason: DropReason) -> Self {
        Self {
            recipients: Vec::new(),
            drop_reason: Some(reason),
        }
    }
}

/// One frame to write to one connection.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub to: PeerId,
    pub kind: Kind,
    /// Exact text to send. Routed frames are forwarded byte for byte.
    pub frame: Arc<str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropRecord {
    pub from: PeerId,
    pub seq: u64,
    pub kind: Kind,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HelloError {
    /// The registry is at capacity; send the error frame and close.
    Full(Delivery),
}

pub struct RelayConfig {
    pub max_peers: usize,
    pub id_seed: Option<u64>,
    /// Keep every dropped envelope in [`Relay::drop_log`].
    pub record_drops: bool,
}

impl Default for RelayConfig {
    fn default() -> Self {
        Self {
            max_peers: DEFAULT_MAX_PEERS,
            id_seed: None,
            record_drops: false,
        }
    }
}

pub struct Relay<C = ()> {
    rng: IdRng,
    max_peers: usize,
    peers: BTreeMap<PeerId, PeerEntry<C>>,
    links: BTreeSet<Link>,
    seq: u64,
    record_drops: bool,
    drop_log: Vec<DropRecord>,
    dropped: u64,
}

impl<C> Relay<C> {
    pub fn new(config: RelayConfig) -> Self {
        Self {
            rng: config.id_seed.map_or_else(entropy_rng, seeded_rng),
            max_peers: config.max_peers,
            peers: BTreeMap::new(),
            links: BTreeSet::new(),
            seq: 0,
            record_drops: config.record_drops,
            drop_log: Vec::new(),
            dropped: 0,
        }
    }

    pub fn peer_count(&self) -> usize {
        self.peers.len()
    }

    pub fn peers(&self) -> impl Iterator<Item = (&PeerId, &PeerEntry<C>)> {
        self.peers.iter()
    }

    pub fn peer(&self, id: &PeerId) -> Option<&PeerEntry<C>> {
        self.peers.get(id)
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.iter()
    }

    pub fn is_linked(&self, a: &PeerId, b: &PeerId) -> bool {
        self.links.contains(&Link::new(a.clone(), b.clone()))
    }

    /// Link partners of `p`, in id order.
    pub fn neighbors(&self, p: &PeerId) -> Vec<PeerId> {
        self.links.iter().filter_map(|l| l.other(p).cloned()).collect()
    }

    pub fn drop_log(&self) -> &[DropRecord] {
        &self.drop_log
    }

    pub fn dropped_count(&self) -> u64 {
        self.dropped
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn control(&mut self, to: &PeerId, now: u64, payload: Payload) -> Delivery {
        let e = Envelope::new(PeerId::server(), to.clone(), self.next_seq(), now, payload);
        Delivery {
            to: to.clone(),
            kind: e.kind(),
            frame: encode_envelope(&e).into(),
        }
    }

    fn error_to(&mut self, to: &PeerId, now: u64, code: &str, message: impl Into<String>) -> Delivery {
        self.control(to, now, Payload::error(code, message))
    }

    /// Registers a new connection and allocates its id. The returned
    /// delivery is the `welcome` frame.
    pub fn handle_hello(
        &mut self,
        conn: C,
        policy: Option<Policy>,
        now: u64,
    ) -> Result<(PeerId, Delivery), HelloError> {
        if self.peers.len() >= self.max_peers {
            let server = PeerId::server();
            let e = Envelope::new(
                server.clone(),
                server.clone(),
                self.next_seq(),
                now,
                Payload::error(codes::SERVER_FULL, format!("relay holds {} peers", self.max_peers)),
            );
            return Err(HelloError::Full(Delivery {
                to: server,
                kind: Kind::Error,
                frame: encode_envelope(&e).into(),
            }));
        }
        let id = loop {
            let id = new_peer_id(&mut self.rng);
            if !id.is_server() && !self.peers.contains_key(&id) {
                break id;
            }
        };
        self.peers.insert(
            id.clone(),
            PeerEntry {
                conn,
                policy: policy.unwrap_or_default(),
                joined_at: now,
            },
        );
        let welcome = self.control(&id, now, Payload::Welcome { id: id.clone() });
        Ok((id, welcome))
    }

    /// Links `from` to `target`. Re-connecting an existing link only repeats
    /// `connect_ok`.
    pub fn handle_connect(&mut self, from: &PeerId, target: &PeerId, now: u64) -> Vec<Delivery> {
        if !self.peers.contains_key(from) {
            return Vec::new();
        }
        if from == target {
            return vec![self.error_to(from, now, codes::SELF_CONNECT, "cannot connect to yourself")];
        }
        if !self.peers.contains_key(target) {
            return vec![self.error_to(from, now, codes::PEER_NOT_FOUND, format!("no peer {target}"))];
        }
        let fresh = self.links.insert(Link::new(from.clone(), target.clone()));
        let mut out = vec![self.control(from, now, Payload::ConnectOk { peer: target.clone() })];
        if fresh {
            out.push(self.control(target, now, Payload::PeerJoined { peer: from.clone() }));
        }
        out
    }

    /// Decides who receives `e`. The sender is never among the recipients.
    pub fn route(&self, e: &Envelope) -> RouteDecision {
        match &e.to {
            Recipient::Peer(to) if to == &e.from => RouteDecision::dropped(DropReason::OriginExcluded),
            Recipient::Peer(to) if !self.peers.contains_key(to) => RouteDecision::dropped(DropReason::PeerNotFound),
            Recipient::Peer(to) if !self.is_linked(&e.from, to) => RouteDecision::dropped(DropReason::NotLinked),
            Recipient::Peer(to) => RouteDecision {
                recipients: vec![to.clone()],
                drop_reason: None,
            },
            Recipient::Broadcast => {
                let recipients = self.neighbors(&e.from);
                if recipients.is_empty() {
                    RouteDecision::dropped(DropReason::NoLinks)
                } else {
                    RouteDecision {
                        recipients,
                        drop_reason: None,
                    }
                }
            }
        }
    }

    fn record_drop(&mut self, e: &Envelope, reason: DropReason) {
        self.dropped += 1;
        if self.record_drops {
            self.drop_log.push(DropRecord {
                from: e.from.clone(),
                seq: e.seq,
                kind: e.kind(),
                reason,
            });
        }
    }

    /// Handles one text frame from the connection registered as `sender`.
    pub fn handle_frame(&mut self, sender: &PeerId, text: &str, now: u64) -> Vec<Delivery> {
        if !self.peers.contains_key(sender) {
            return Vec::new();
        }
        let e = match decode_str(text) {
            Ok(e) => e,
            Err(err) => return vec![self.error_to(sender, now, err.code(), err.to_string())],
        };
        if &e.from != sender {
            return vec![self.error_to(
                sender,
                now,
                codes::BAD_FROM,
                format!("frame claims to be from {}", e.from),
            )];
        }
        match e.kind() {
            Kind::Hello => vec![self.error_to(sender, now, codes::ALREADY_REGISTERED, "hello already done")],
            Kind::Connect => match &e.payload {
                Payload::Connect { target } => {
                    let target = target.clone();
                    self.handle_connect(sender, &target, now)
                }
                _ => unreachable!(),
            },
            Kind::Welcome | Kind::ConnectOk | Kind::PeerJoined | Kind::PeerLeft => {
                vec![self.error_to(
                    sender,
                    now,
                    codes::UNEXPECTED_KIND,
                    format!("{} is only sent by the relay", e.kind()),
                )]
            }
            // Errors from clients are informational; nothing to route.
            Kind::Error => Vec::new(),
            Kind::Rotation
            | Kind::State
            | Kind::Command
            | Kind::Chat
            | Kind::FileManifest
            | Kind::FileChunk
            | Kind::FileAck => self.forward(e, text, now),
        }
    }

    fn forward(&mut self, e: Envelope, text: &str, now: u64) -> Vec<Delivery> {
        let decision = self.route(&e);
        if let Some(reason) = decision.drop_reason {
            self.record_drop(&e, reason);
            let code = match reason {
                DropReason::NotLinked => codes::NOT_LINKED,
                DropReason::PeerNotFound => codes::PEER_NOT_FOUND,
                DropReason::NoLinks | DropReason::OriginExcluded => return Vec::new(),
            };
            let to = e.to.to_string();
            return vec![self.error_to(&e.from, now, code, format!("cannot deliver to {to}"))];
        }
        let frame: Arc<str> = text.into();
        decision
            .recipients
            .into_iter()
            .map(|to| Delivery {
                to,
                kind: e.kind(),
                frame: frame.clone(),
            })
            .collect()
    }

    /// Removes `p` and all its links, notifying former partners. Returns the
    /// removed connection handle too.
    pub fn handle_disconnect(&mut self, p: &PeerId, now: u64) -> (Option<C>, Vec<Delivery>) {
        let Some(entry) = self.peers.remove(p) else {
            return (None, Vec::new());
        };
        let partners = self.neighbors(p);
        self.links.retain(|l| l.other(p).is_none());
        let notes = partners
            .iter()
            .map(|q| self.control(q, now, Payload::PeerLeft { peer: p.clone() }))
            .collect();
        (Some(entry.conn), notes)
    }

    /// Checks the registry invariants: every link endpoint is registered
    /// and no link is a self-loop.
    pub fn is_consistent(&self) -> bool {
        self.links.iter().all(|l| {
            let (a, b) = l.endpoints();
            a != b && self.peers.contains_key(a) && self.peers.contains_key(b)
        })
    }
}

impl<C> Relay<C> {
    /// Convenience for tests and the simulator: decodes a hello frame and
    /// registers it.
    pub fn hello_frame(&mut self, conn: C, text: &str, now: u64) -> Result<(PeerId, Delivery), Delivery> {
        let policy = match decode_str(text) {
            Ok(Envelope {
                payload: Payload::Hello { policy },
                ..
            }) => policy,
            Ok(e) => {
                return Err(self.control(
                    &PeerId::server(),
                    now,
                    Payload::error(codes::UNEXPECTED_KIND, format!("expected hello, got {}", e.kind())),
                ))
            }
            Err(err) => return Err(self.control(&PeerId::server(), now, Payload::error(err.code(), err.to_string()))),
        };
        self.handle_hello(conn, policy, now).map_err(|HelloError::Full(d)| d)
    }
}
