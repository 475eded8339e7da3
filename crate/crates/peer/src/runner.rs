//! Executes an [`ActionScript`] against a session on any clock.

use std::path::Path;

use molsync_core::{encode_envelope, Envelope};

use crate::script::{Action, ActionScript};
use crate::session::{PeerSession, SessionError};
use crate::transcript::Transcript;

#[derive(Debug, thiserror::Error)]
pub enum ActionError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
}

/// Runs one action. File actions read from disk; everything else is pure.
pub fn perform(session: &mut PeerSession, action: &Action, now: u64) -> Result<Vec<Envelope>, ActionError> {
    Ok(match action {
        Action::Connect(target) => vec![session.connect(target.clone(), now)],
        Action::SetPolicy(p) => {
            session.set_policy(*p);
            Vec::new()
        }
        Action::Drag(q) => session.local_drag(*q, now),
        Action::Zoom(z) => session.local_zoom(*z, now)?,
        Action::Command(text) => session.send_command(text, now)?,
        Action::Chat(text) => session.send_chat(text, now),
        Action::SendFile(path) => {
            let bytes = std::fs::read(path).map_err(|source| ActionError::Read {
                path: path.display().to_string(),
                source,
            })?;
            session.send_file(&file_name(path), &bytes, now)?
        }
        Action::Disconnect => {
            session.disconnect();
            Vec::new()
        }
    })
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| "file".to_owned(), |n| n.to_string_lossy().into_owned())
}

/// Encodes an outgoing envelope and books it in the stats and transcript.
pub fn encode_outgoing(session: &mut PeerSession, transcript: &mut Transcript, e: &Envelope, now: u64) -> String {
    let text = encode_envelope(e);
    session.record_sent(e, text.len());
    transcript.sent(now, e, text.len());
    text
}

/// Cursor over a script whose times are offsets from `base`.
#[derive(Debug, Clone)]
pub struct ScriptRunner {
    script: ActionScript,
    base: u64,
    next: usize,
}

impl ScriptRunner {
    pub fn new(script: ActionScript, base: u64) -> Self {
        Self { script, base, next: 0 }
    }

    pub fn next_due(&self) -> Option<u64> {
        self.script.actions().get(self.next).map(|a| self.base + a.at_ms)
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.script.len()
    }

    /// Performs every action due at or before `now`. Failures are recorded
    /// and skipped. Stops after a disconnect.
    pub fn run_due(&mut self, session: &mut PeerSession, now: u64, transcript: &mut Transcript) -> Vec<Envelope> {
        let mut out = Vec::new();
        while let Some(due) = self.next_due().filter(|&d| d <= now) {
            let action = &self.script.actions()[self.next].action;
            self.next += 1;
            transcript.action(due, action);
            match perform(session, action, due) {
                Ok(envs) => out.extend(envs),
                Err(e) => transcript.error(due, format!("{}: {e}", action.verb())),
            }
            if session.is_closed() {
                self.next = self.script.len();
            }
        }
        out
    }
}

/// Runs a script with nothing on the other end, on a simulated clock, and
/// returns everything the session would have sent in order.
pub fn run_offline(session: &mut PeerSession, script: ActionScript, transcript: &mut Transcript) -> Vec<Envelope> {
    let mut runner = ScriptRunner::new(script, 0);
    let mut sent = Vec::new();
    loop {
        let next = [runner.next_due(), session.next_deadline()].into_iter().flatten().min();
        let Some(now) = next else { break };
        let mut out = session.tick(now);
        out.extend(runner.run_due(session, now, transcript));
        for e in &out {
            encode_outgoing(session, transcript, e, now);
        }
        sent.extend(out);
    }
    sent
}
