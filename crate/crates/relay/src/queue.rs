//! Per-connection outbound buffer.
//!
//! Bounded for snapshots only. When full, the oldest queued rotation/state
//! frame is evicted to make room; if none is queued, an incoming snapshot is
//! dropped instead. Command, chat, file and control frames are never dropped,
//! so the queue may exceed its cap when a consumer stalls on those.

use std::collections::VecDeque;
use std::sync::Arc;

use molsync_core::Kind;

pub const DEFAULT_QUEUE_CAP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PushOutcome {
    Queued,
    /// Queued after evicting an older snapshot.
    EvictedSnapshot,
    /// The incoming snapshot was discarded.
    DroppedIncoming,
}

#[derive(Debug)]
pub struct OutboundQueue {
    cap: usize,
    items: VecDeque<(Kind, Arc<str>)>,
    dropped: u64,
}

impl OutboundQueue {
    pub fn new(cap: usize) -> Self {
        Self {
            cap,
            items: VecDeque::new(),
            dropped: 0,
        }
    }

    pub fn push(&mut self, kind: Kind, frame: Arc<str>) -> PushOutcome {
        if self.items.len() < self.cap {
            self.items.push_back((kind, frame));
            return PushOutcome::Queued;
        }
        if let Some(pos) = self.items.iter().position(|(k, _)| k.is_snapshot()) {
            self.items.remove(pos);
            self.items.push_back((kind, frame));
            self.dropped += 1;
            return PushOutcome::EvictedSnapshot;
        }
        if kind.is_snapshot() {
            self.dropped += 1;
            return PushOutcome::DroppedIncoming;
        }
        self.items.push_back((kind, frame));
        PushOutcome::Queued
    }

    pub fn pop(&mut self) -> Option<Arc<str>> {
        self.items.pop_front().map(|(_, f)| f)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

impl Default for OutboundQueue {
    fn default() -> Self {
        Self::new(DEFAULT_QUEUE_CAP)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(s: &str) -> Arc<str> {
        s.into()
    }

    #[test]
    fn fifo_under_cap() {
        let mut q = OutboundQueue::new(3);
        q.push(Kind::Chat, f("1"));
        q.push(Kind::State, f("2"));
        assert_eq!(q.pop().as_deref(), Some("1"));
        assert_eq!(q.pop().as_deref(), Some("2"));
        assert!(q.pop().is_none());
    }

    #[test]
    fn overflow_evicts_oldest_snapshot() {
        let mut q = OutboundQueue::new(3);
        q.push(Kind::Command, f("c"));
        q.push(Kind::Rotation, f("r1"));
        q.push(Kind::Rotation, f("r2"));
        assert_eq!(q.push(Kind::Chat, f("chat")), PushOutcome::EvictedSnapshot);
        let all: Vec<_> = std::iter::from_fn(|| q.pop()).collect();
        assert_eq!(all.iter().map(|s| &**s).collect::<Vec<_>>(), ["c", "r2", "chat"]);
        assert_eq!(q.dropped(), 1);
    }

    #[test]
    fn reliable_kinds_never_dropped() {
        let mut q = OutboundQueue::new(2);
        q.push(Kind::Command, f("c1"));
        q.push(Kind::FileChunk, f("c2"));
        assert_eq!(q.push(Kind::State, f("s")), PushOutcome::DroppedIncoming);
        assert_eq!(q.push(Kind::Chat, f("c3")), PushOutcome::Queued);
        assert_eq!(q.len(), 3);
    }

    #[test]
    fn default_cap() {
        let mut q = OutboundQueue::default();
        for i in 0..DEFAULT_QUEUE_CAP {
            assert_eq!(q.push(Kind::Rotation, f(&i.to_string())), PushOutcome::Queued);
        }
        assert_eq!(q.push(Kind::Rotation, f("x")), PushOutcome::EvictedSnapshot);
        assert_eq!(q.len(), DEFAULT_QUEUE_CAP);
        assert_eq!(q.pop().as_deref(), Some("1"));
    }
}
