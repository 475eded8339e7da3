//! The event loop.
//!
//! Peers talk to an in-process relay. Frames reach the relay at the instant
//! they are sent; the whole one-way delay is charged on the relay to
//! recipient leg, which is also where loss and reordering happen. Time is
//! in whole milliseconds and ties are broken by scheduling order, so a run
//! is a pure function of its scenario and profile.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use molsync_core::{decode_str, seeded_rng, IdRng, Kind, PeerId, SMALL_FRAME_BYTES};
use molsync_peer::{encode_outgoing, ActionScript, PeerSession, ScriptError, ScriptRunner, SessionOptions, Transcript};
use molsync_relay::{Delivery, DropRecord, Relay, RelayConfig};
use rand::Rng;

use crate::profile::{NetProfile, ProfileError};
use crate::report::{LatencySummary, PeerReport, ScenarioReport};
use crate::scenario::{Scenario, ScenarioError};

/// Camera fields must agree this closely for a run to count as converged.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("script for {peer}: {source}")]
    Script { peer: String, source: ScriptError },
    #[error("relay refused {0}")]
    Refused(String),
    #[error("no quiescence after {budget} events; still in flight: {}", pending.join("; "))]
    NotQuiescent { budget: u64, pending: Vec<String> },
}

#[derive(Debug, Clone)]
enum Event {
    Wake(usize),
    ToRelay { from: usize, frame: String },
    Deliver { to: usize, kind: Kind, frame: Arc<str> },
}

#[derive(Debug)]
struct Scheduled {
    at: u64,
    seq: u64,
    event: Event,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// One frame handed to a peer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryRecord {
    pub at: u64,
    pub to: PeerId,
    pub from: PeerId,
    pub kind: Kind,
    pub seq: u64,
    pub hop: Option<u8>,
    pub bytes: usize,
}

struct SimPeer {
    name: String,
    session: PeerSession,
    runner: ScriptRunner,
    transcript: Transcript,
    wake: Option<u64>,
    departed: bool,
    latencies: Vec<u64>,
}

pub struct Simulation {
    profile: NetProfile,
    budget: u64,
    relay: Relay<usize>,
    peers: Vec<SimPeer>,
    index: BTreeMap<PeerId, usize>,
    heap: BinaryHeap<Scheduled>,
    next_seq: u64,
    now: u64,
    rng: IdRng,
    channel_clock: Vec<u64>,
    trace: Vec<DeliveryRecord>,
    delivered: BTreeMap<&'static str, u64>,
    lost: BTreeMap<&'static str, u64>,
    bytes_on_wire: u64,
    max_view_frame: usize,
    last_original_send: Option<u64>,
    last_apply: Option<u64>,
    events: u64,
    finished: bool,
}

fn substitute_names(line: &str, scenario: &Scenario, ids: &[PeerId]) -> String {
    let mut words = line.split_whitespace();
    if let (Some(at), Some("connect"), Some(target), None) = (words.next(), words.next(), words.next(), words.next()) {
        if let Some(i) = scenario.index_of(target) {
            return format!("{at} connect {}", ids[i]);
        }
    }
    line.to_owned()
}

impl Simulation {
    pub fn new(scenario: &Scenario, profile: &NetProfile) -> Result<Self, SimError> {
        scenario.validate()?;
        profile.validate()?;
        let mut relay = Relay::new(RelayConfig {
            max_peers: scenario.peers.len().max(1),
            id_seed: Some(profile.seed),
            record_drops: true,
        });
        let mut ids = Vec::new();
        let mut welcomes = Vec::new();
        for (i, spec) in scenario.peers.iter().enumerate() {
            let (id, welcome) = relay
                .handle_hello(i, Some(spec.policy), 0)
                .map_err(|_| SimError::Refused(spec.name.clone()))?;
            ids.push(id);
            welcomes.push(welcome);
        }
        let mut peers = Vec::new();
        for (i, spec) in scenario.peers.iter().enumerate() {
            let text: String = spec
                .script
                .iter()
                .map(|l| substitute_names(l, scenario, &ids) + "\n")
                .collect();
            let script: ActionScript = text.parse().map_err(|source| SimError::Script {
                peer: spec.name.clone(),
                source,
            })?;
            let opts = SessionOptions {
                policy: spec.policy,
                hub_mode: spec.hub,
                seed: Some(profile.seed.wrapping_add(i as u64 + 1)),
                ..SessionOptions::default()
            };
            let mut transcript = Transcript::new();
            transcript.peer = Some(ids[i].clone());
            peers.push(SimPeer {
                name: spec.name.clone(),
                session: PeerSession::new(ids[i].clone(), opts),
                runner: ScriptRunner::new(script, 0),
                transcript,
                wake: None,
                departed: false,
                latencies: Vec::new(),
            });
        }
        let n = peers.len();
        let mut sim = Simulation {
            profile: profile.clone(),
            budget: scenario.event_budget,
            relay,
            peers,
            index: ids.iter().cloned().zip(0..).collect(),
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: 0,
            rng: seeded_rng(profile.seed),
            channel_clock: vec![0; n],
            trace: Vec::new(),
            delivered: BTreeMap::new(),
            lost: BTreeMap::new(),
            bytes_on_wire: 0,
            max_view_frame: 0,
            last_original_send: None,
            last_apply: None,
            events: 0,
            finished: false,
        };
        // Joining and linking happen before the clock starts, without delay.
        for w in welcomes {
            sim.hand_over(&w);
        }
        for (a, b) in &scenario.links {
            let (ia, ib) = (scenario.index_of(a).unwrap(), scenario.index_of(b).unwrap());
            let req = sim.peers[ia].session.connect(ids[ib].clone(), 0);
            let p = &mut sim.peers[ia];
            let text = encode_outgoing(&mut p.session, &mut p.transcript, &req, 0);
            for d in sim.relay.handle_frame(&ids[ia], &text, 0) {
                sim.hand_over(&d);
            }
        }
        for i in 0..n {
            sim.reschedule(i);
        }
        Ok(sim)
    }

    fn schedule(&mut self, at: u64, event: Event) {
        self.next_seq += 1;
        self.heap.push(Scheduled {
            at,
            seq: self.next_seq,
            event,
        });
    }

    // Immediate, lossless delivery used during setup.
    fn hand_over(&mut self, d: &Delivery) {
        let to = self.index[&d.to];
        self.receive(to, d.kind, &d.frame);
    }

    fn reschedule(&mut self, i: usize) {
        let p = &self.peers[i];
        if p.departed {
            return;
        }
        let next = [p.runner.next_due(), p.session.next_deadline()]
            .into_iter()
            .flatten()
            .min();
        let next = next.map(|t| t.max(self.now));
        if next != p.wake {
            self.peers[i].wake = next;
            if let Some(t) = next {
                self.schedule(t, Event::Wake(i));
            }
        }
    }

    /// Processes events until none are left.
    pub fn run(&mut self) -> Result<(), SimError> {
        while let Some(Scheduled { at, event, .. }) = self.heap.pop() {
            self.events += 1;
            if self.events > self.budget {
                self.heap.push(Scheduled { at, seq: 0, event });
                return Err(SimError::NotQuiescent {
                    budget: self.budget,
                    pending: self.describe_pending(10),
                });
            }
            self.now = at;
            match event {
                Event::Wake(i) => {
                    if self.peers[i].wake == Some(at) {
                        self.peers[i].wake = None;
                        self.step(i);
                    }
                }
                Event::ToRelay { from, frame } => {
                    if !self.peers[from].departed {
                        let id = self.peers[from].session.id().clone();
                        let out = self.relay.handle_frame(&id, &frame, at);
                        self.route(out);
                    }
                }
                Event::Deliver { to, kind, frame } => {
                    if !self.peers[to].departed {
                        self.receive(to, kind, &frame);
                        self.reschedule(to);
                    }
                }
            }
        }
        self.finished = true;
        Ok(())
    }

    fn describe_pending(&self, limit: usize) -> Vec<String> {
        let mut v: Vec<&Scheduled> = self.heap.iter().collect();
        v.sort_by(|a, b| b.cmp(a));
        v.into_iter()
            .take(limit)
            .map(|s| match &s.event {
                Event::Wake(i) => format!("t={} wake {}", s.at, self.peers[*i].name),
                Event::ToRelay { from, frame } => {
                    format!("t={} {} -> relay {}", s.at, self.peers[*from].name, summary(frame))
                }
                Event::Deliver { to, frame, .. } => {
                    format!("t={} relay -> {} {}", s.at, self.peers[*to].name, summary(frame))
                }
            })
            .collect()
    }

    fn step(&mut self, i: usize) {
        let now = self.now;
        let p = &mut self.peers[i];
        let mut out = p.session.tick(now);
        out.extend(p.runner.run_due(&mut p.session, now, &mut p.transcript));
        for e in out {
            let p = &mut self.peers[i];
            let frame = encode_outgoing(&mut p.session, &mut p.transcript, &e, now);
            if e.is_original_update() {
                self.last_original_send = Some(now);
            }
            self.schedule(now, Event::ToRelay { from: i, frame });
        }
        if self.peers[i].session.is_closed() && !self.peers[i].departed {
            self.peers[i].departed = true;
            let id = self.peers[i].session.id().clone();
            let (_, notes) = self.relay.handle_disconnect(&id, now);
            self.route(notes);
        }
        self.reschedule(i);
    }

    fn route(&mut self, deliveries: Vec<Delivery>) {
        let profile = self.profile.clone();
        for d in deliveries {
            let to = self.index[&d.to];
            // Always draw both numbers so the stream does not depend on
            // which frames are lossy.
            let u_loss: f64 = self.rng.random();
            let u_jit: f64 = self.rng.random();
            if profile.loss_rate > 0.0 && profile.loss_scope.covers(d.kind) && u_loss < profile.loss_rate {
                *self.lost.entry(d.kind.as_str()).or_default() += 1;
                continue;
            }
            let delay = (profile.latency_ms + (2.0 * u_jit - 1.0) * profile.jitter_ms)
                .round()
                .max(0.0) as u64;
            let mut at = self.now + delay;
            if !(profile.reorder && d.kind.is_snapshot()) {
                at = at.max(self.channel_clock[to]);
                self.channel_clock[to] = at;
            }
            self.schedule(
                at,
                Event::Deliver {
                    to,
                    kind: d.kind,
                    frame: d.frame,
                },
            );
        }
    }

    fn receive(&mut self, to: usize, kind: Kind, frame: &str) {
        let now = self.now;
        *self.delivered.entry(kind.as_str()).or_default() += 1;
        self.bytes_on_wire += frame.len() as u64;
        if kind.is_view_update() {
            self.max_view_frame = self.max_view_frame.max(frame.len());
        }
        let p = &mut self.peers[to];
        let Ok(e) = decode_str(frame) else {
            p.session.on_frame(frame, now);
            p.transcript.error(now, "undecodable frame");
            return;
        };
        self.trace.push(DeliveryRecord {
            at: now,
            to: p.session.id().clone(),
            from: e.from.clone(),
            kind,
            seq: e.seq,
            hop: e.payload.hop(),
            bytes: frame.len(),
        });
        p.transcript.received(now, &e, frame.len());
        let before = p.session.stats().applied;
        let replies = p.session.on_receive(&e, frame.len(), now);
        if p.session.stats().applied > before {
            p.latencies.push(now.saturating_sub(e.ts));
            self.last_apply = Some(now);
        }
        for r in replies {
            let p = &mut self.peers[to];
            let frame = encode_outgoing(&mut p.session, &mut p.transcript, &r, now);
            self.schedule(now, Event::ToRelay { from: to, frame });
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn relay(&self) -> &Relay<usize> {
        &self.relay
    }

    pub fn relay_drops(&self) -> &[DropRecord] {
        self.relay.drop_log()
    }

    /// Every frame handed to a peer, in delivery order.
    pub fn deliveries(&self) -> &[DeliveryRecord] {
        &self.trace
    }

    pub fn peer_names(&self) -> impl Iterator<Item = &str> {
        self.peers.iter().map(|p| p.name.as_str())
    }

    fn by_name(&self, name: &str) -> &SimPeer {
        self.peers
            .iter()
            .find(|p| p.name == name)
            .unwrap_or_else(|| panic!("no peer {name:?}"))
    }

    pub fn session(&self, name: &str) -> &PeerSession {
        &self.by_name(name).session
    }

    pub fn transcript(&self, name: &str) -> &Transcript {
        &self.by_name(name).transcript
    }

    pub fn id_of(&self, name: &str) -> &PeerId {
        self.by_name(name).session.id()
    }

    /// Connected peers agree on the camera within
    /// [`CONVERGENCE_TOLERANCE`] and hold identical command logs.
    pub fn is_converged(&self) -> bool {
        let live: Vec<&PeerSession> = self.peers.iter().filter(|p| !p.departed).map(|p| &p.session).collect();
        live.windows(2).all(|w| {
            w[0].model.camera_matches(&w[1].model, CONVERGENCE_TOLERANCE)
                && w[0].model.command_log == w[1].model.command_log
        })
    }

    pub fn report(&self) -> ScenarioReport {
        let converged = self.finished && self.is_converged();
        let convergence_time_ms = converged.then(|| match (self.last_apply, self.last_original_send) {
            (Some(a), Some(s)) => a.saturating_sub(s),
            _ => 0,
        });
        let mut all = Vec::new();
        let peers = self
            .peers
            .iter()
            .map(|p| {
                all.extend_from_slice(&p.latencies);
                PeerReport {
                    name: p.name.clone(),
                    id: p.session.id().to_string(),
                    hub: p.session.hub_mode,
                    links: p.session.links().len(),
                    departed: p.departed,
                    latency: LatencySummary::of(&p.latencies),
                    commands: p.session.model.command_log.len(),
                    chat_lines: p.session.chat_log().len(),
                    stats: p.session.stats().clone(),
                }
            })
            .collect();
        ScenarioReport {
            profile: self.profile.clone(),
            converged,
            convergence_time_ms,
            end_time_ms: self.now,
            events: self.events,
            latency: LatencySummary::of(&all),
            delivered: self.delivered.clone(),
            lost_in_network: self.lost.clone(),
            relay_drops: self.relay.dropped_count(),
            bytes_on_wire: self.bytes_on_wire,
            max_view_frame_bytes: self.max_view_frame,
            view_frames_small: self.max_view_frame <= SMALL_FRAME_BYTES,
            peers,
        }
    }
}

fn summary(frame: &str) -> String {
    match decode_str(frame) {
        Ok(e) => format!("{} from {} seq {}", e.kind(), e.from, e.seq),
        Err(_) => "undecodable".into(),
    }
}

/// Builds, runs and reports in one call.
pub fn run_scenario(scenario: &Scenario, profile: &NetProfile) -> Result<ScenarioReport, SimError> {
    let mut sim = Simulation::new(scenario, profile)?;
    sim.run()?;
    Ok(sim.report())
}
