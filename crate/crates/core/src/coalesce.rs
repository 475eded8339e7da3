//! Rate limiting for outbound camera snapshots.
//!
//! During a drag the viewer produces far more snapshots than are worth
//! sending. Only the newest pending snapshot is kept; it goes out as soon as
//! the minimum interval since the previous emission has passed. Anything it
//! replaced is dropped, never queued.

use crate::view::ViewState;

pub const DEFAULT_MAX_RATE: f64 = 20.0;

fn interval_ms(max_rate: f64) -> f64 {
    assert!(max_rate > 0.0, "max_rate must be positive");
    1000.0 / max_rate
}

fn may_emit(last_emit: Option<u64>, now: u64, max_rate: f64) -> bool {
    match last_emit {
        None => true,
        Some(last) => now.saturating_sub(last) as f64 >= interval_ms(max_rate),
    }
}

/// Picks what to emit from a time-ordered list of pending snapshots: the
/// newest one, if at least `1000 / max_rate` ms have passed since
/// `last_emit`.
pub fn coalesce(pending: &[ViewState], max_rate: f64, now: u64, last_emit: Option<u64>) -> Option<ViewState> {
    let newest = pending.last()?;
    may_emit(last_emit, now, max_rate).then(|| newest.clone())
}

/// Stateful single-slot coalescer driven by an external millisecond clock.
#[derive(Debug, Clone)]
pub struct Coalescer<T> {
    max_rate: f64,
    last_emit: Option<u64>,
    pending: Option<T>,
}

impl<T> Coalescer<T> {
    pub fn new(max_rate: f64) -> Self {
        interval_ms(max_rate);
        Self {
            max_rate,
            last_emit: None,
            pending: None,
        }
    }

    /// Replaces the pending item and emits it if the channel is idle.
    pub fn offer(&mut self, item: T, now: u64) -> Option<T> {
        self.pending = Some(item);
        self.poll(now)
    }

    /// Emits the pending item if its interval has elapsed.
    pub fn poll(&mut self, now: u64) -> Option<T> {
        if self.pending.is_some() && may_emit(self.last_emit, now, self.max_rate) {
            self.last_emit = Some(now);
            self.pending.take()
        } else {
            None
        }
    }

    pub fn pending(&self) -> Option<&T> {
        self.pending.as_ref()
    }

    /// Earliest time at which `poll` will emit the pending item.
    pub fn deadline(&self) -> Option<u64> {
        self.pending.as_ref()?;
        Some(match self.last_emit {
            None => 0,
            Some(last) => last + interval_ms(self.max_rate).ceil() as u64,
        })
    }

    pub fn last_emit(&self) -> Option<u64> {
        self.last_emit
    }
}

impl<T> Default for Coalescer<T> {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_RATE)
    }
}
