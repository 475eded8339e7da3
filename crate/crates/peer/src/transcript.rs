//! Event record of one peer's run, written as JSON lines.

use std::io::{self, Write};

use molsync_core::{Envelope, PeerId, Recipient};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Sent {
        at: u64,
        kind: &'static str,
        from: String,
        to: String,
        seq: u64,
        bytes: usize,
    },
    Received {
        at: u64,
        kind: &'static str,
        from: String,
        to: String,
        seq: u64,
        bytes: usize,
    },
    Action {
        at: u64,
        action: String,
    },
    Error {
        at: u64,
        message: String,
    },
}

impl Event {
    pub fn at(&self) -> u64 {
        match self {
            Event::Sent { at, .. }
            | Event::Received { at, .. }
            | Event::Action { at, .. }
            | Event::Error { at, .. } => *at,
        }
    }
}

fn recipient(r: &Recipient) -> String {
    match r {
        Recipient::Peer(p) => p.to_string(),
        Recipient::Broadcast => "*".into(),
    }
}

#[derive(Debug, Default)]
pub struct Transcript {
    pub peer: Option<PeerId>,
    events: Vec<Event>,
    echo: bool,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also prints each event to stdout as it is recorded.
    pub fn echoing() -> Self {
        Self {
            echo: true,
            ..Self::default()
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn push(&mut self, e: Event) {
        if self.echo {
            let mut out = io::stdout().lock();
            let _ = writeln!(out, "{}", serde_json::to_string(&e).expect("serializable"));
        }
        self.events.push(e);
    }

    pub fn sent(&mut self, at: u64, e: &Envelope, bytes: usize) {
        self.push(Event::Sent {
            at,
            kind: e.kind().as_str(),
            from: e.from.to_string(),
            to: recipient(&e.to),
            seq: e.seq,
            bytes,
        });
    }

    pub fn received(&mut self, at: u64, e: &Envelope, bytes: usize) {
        self.push(Event::Received {
            at,
            kind: e.kind().as_str(),
            from: e.from.to_string(),
            to: recipient(&e.to),
            seq: e.seq,
            bytes,
        });
    }

    pub fn action(&mut self, at: u64, action: impl ToString) {
        self.push(Event::Action {
            at,
            action: action.to_string(),
        });
    }

    pub fn error(&mut self, at: u64, message: impl ToString) {
        self.push(Event::Error {
            at,
            message: message.to_string(),
        });
    }

    pub fn write_json_lines(&self, mut w: impl Write) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_json_lines(&self) -> String {
        let mut buf = Vec::new();
        self.write_json_lines(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn sent_count(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::Sent { .. })).count()
    }
}
