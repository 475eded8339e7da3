//! Timed action scripts.
//!
//! One action per line: `<at_ms> <verb> <args>`. Blank lines and lines
//! starting with `#` are skipped.
//!
//! ```text
//! 0     connect Xb3kQ9aaaaaaaaaa
//! 0     policy 1,1,1/1,1,0
//! 100   drag 0.9239 0 0.3827 0
//! 150   zoom 140
//! 200   command spin on
//! 250   chat hello there
//! 300   send_file ./caffeine.pdb
//! 5000  disconnect
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use molsync_core::{PeerId, Policy, Quaternion, UnitQuaternion};

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Connect(PeerId),
    SetPolicy(Policy),
    Drag(UnitQuaternion),
    Zoom(f64),
    Command(String),
    Chat(String),
    SendFile(PathBuf),
    Disconnect,
}

impl Action {
    pub fn verb(&self) -> &'static str {
        match self {
            Action::Connect(_) => "connect",
            Action::SetPolicy(_) => "policy",
            Action::Drag(_) => "drag",
            Action::Zoom(_) => "zoom",
            Action::Command(_) => "command",
            Action::Chat(_) => "chat",
            Action::SendFile(_) => "send_file",
            Action::Disconnect => "disconnect",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verb = self.verb();
        match self {
            Action::Connect(p) => write!(f, "{verb} {p}"),
            Action::SetPolicy(p) => write!(f, "{verb} {p}"),
            Action::Drag(q) => {
                let [w, x, y, z] = q.to_array();
                write!(f, "{verb} {w} {x} {y} {z}")
            }
            Action::Zoom(z) => write!(f, "{verb} {z}"),
            Action::Command(t) | Action::Chat(t) => write!(f, "{verb} {t}"),
            Action::SendFile(p) => write!(f, "{verb} {}", p.display()),
            Action::Disconnect => f.write_str(verb),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedAction {
    pub at_ms: u64,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct ScriptError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionScript {
    actions: Vec<TimedAction>,
}

impl ActionScript {
    /// Fails if timestamps go backwards.
    pub fn new(actions: Vec<TimedAction>) -> Result<Self, ScriptError> {
        if let Some(i) = actions.windows(2).position(|w| w[1].at_ms < w[0].at_ms) {
            return Err(ScriptError {
                line: i + 2,
                reason: "timestamps must be non-decreasing".into(),
            });
        }
        Ok(Self { actions })
    }

    pub fn actions(&self) -> &[TimedAction] {
        &self.actions
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }
}

/// Parses one non-comment line.
pub fn parse_line(line: &str) -> Result<TimedAction, String> {
    let line = line.trim();
    let (at, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let at_ms = at.parse::<u64>().map_err(|_| format!("bad timestamp {at:?}"))?;
    let rest = rest.trim_start();
    let (verb, args) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    let args = args.trim();
    let need_text = |what: &str| {
        if args.is_empty() {
            Err(format!("{what} needs an argument"))
        } else {
            Ok(args.to_owned())
        }
    };
    let action = match verb {
        "connect" => Action::Connect(args.parse().map_err(|e| format!("{e}"))?),
        "policy" => Action::SetPolicy(args.parse().map_err(|e| format!("{e}"))?),
        "drag" => {
            let v: Vec<f64> = args
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| "drag takes four numbers".to_owned())?;
            let [w, x, y, z] = v[..] else {
                return Err("drag takes four numbers".into());
            };
            Action::Drag(UnitQuaternion::normalize(Quaternion::new(w, x, y, z)).map_err(|e| e.to_string())?)
        }
        "zoom" => Action::Zoom(args.parse().map_err(|_| format!("bad zoom {args:?}"))?),
        "command" => Action::Command(need_text("command")?),
        "chat" => Action::Chat(need_text("chat")?),
        "send_file" => Action::SendFile(need_text("send_file")?.into()),
        "disconnect" if args.is_empty() => Action::Disconnect,
        "disconnect" => return Err("disconnect takes no arguments".into()),
        "" => return Err("missing verb".into()),
        other => return Err(format!("unknown verb {other:?}")),
    };
    Ok(TimedAction { at_ms, action })
}

impl FromStr for ActionScript {
    type Err = ScriptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut actions = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let a = parse_line(line).map_err(|reason| ScriptError { line: i + 1, reason })?;
            if actions.last().is_some_and(|p: &TimedAction| a.at_ms < p.at_ms) {
                return Err(ScriptError {
                    line: i + 1,
                    reason: "timestamps must be non-decreasing".into(),
                });
            }
            actions.push(a);
        }
        Ok(Self { actions })
    }
}

impl fmt::Display for ActionScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.actions {
            writeln!(f, "{} {}", a.at_ms, a.action)?;
        }
        Ok(())
    }
}
