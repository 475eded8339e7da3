//! Scenario descriptions.
//!
//! ```text
//! # star with a re-sharing master
//! peer master hub
//! peer a policy=1,1,1/1,1,0
//! peer b script=b.actions
//! link a master
//! link b master
//! at master 0 drag 1 0 0 0
//! at master 50 zoom 120
//! ```
//!
//! `at` lines use the action script syntax. In scenarios, `connect` takes a
//! peer name instead of an id.

use std::path::Path;

use molsync_core::Policy;

#[derive(Debug, Clone, PartialEq)]
pub struct PeerSpec {
    pub name: String,
    pub hub: bool,
    pub policy: Policy,
    /// Action script lines, `<at_ms> <verb> <args>`.
    pub script: Vec<String>,
}

impl PeerSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            hub: false,
            policy: Policy::default(),
            script: Vec::new(),
        }
    }

    pub fn hub(mut self) -> Self {
        self.hub = true;
        self
    }

    pub fn policy(mut self, p: Policy) -> Self {
        self.policy = p;
        self
    }

    pub fn at(mut self, at_ms: u64, action: &str) -> Self {
        self.script.push(format!("{at_ms} {action}"));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub peers: Vec<PeerSpec>,
    /// Established before the clock starts, in order.
    pub links: Vec<(String, String)>,
    /// Events processed before the run is declared non-quiescent.
    pub event_budget: u64,
}

pub const DEFAULT_EVENT_BUDGET: u64 = 5_000_000;

impl Default for Scenario {
    fn default() -> Self {
        Self {
            peers: Vec::new(),
            links: Vec::new(),
            event_budget: DEFAULT_EVENT_BUDGET,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown peer {0:?}")]
    UnknownPeer(String),
    #[error("duplicate peer {0:?}")]
    DuplicatePeer(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Scenario {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn peer(mut self, p: PeerSpec) -> Self {
        self.peers.push(p);
        self
    }

    pub fn link(mut self, a: &str, b: &str) -> Self {
        self.links.push((a.into(), b.into()));
        self
    }

    /// Star topology: every spoke links to `hub`.
    pub fn star(hub: PeerSpec, spokes: impl IntoIterator<Item = PeerSpec>) -> Self {
        let hub_name = hub.name.clone();
        let mut s = Scenario::new().peer(hub);
        for spoke in spokes {
            let name = spoke.name.clone();
            s = s.peer(spoke).link(&name, &hub_name);
        }
        s
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.peers.iter().position(|p| p.name == name)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (i, p) in self.peers.iter().enumerate() {
            if self.peers[..i].iter().any(|q| q.name == p.name) {
                return Err(ScenarioError::DuplicatePeer(p.name.clone()));
            }
        }
        for (a, b) in &self.links {
            for n in [a, b] {
                if self.index_of(n).is_none() {
                    return Err(ScenarioError::UnknownPeer(n.clone()));
                }
            }
        }
        Ok(())
    }

    /// Parses scenario text. `script=` paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ScenarioError> {
        let mut s = Scenario::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |reason: String| ScenarioError::Syntax { line: i + 1, reason };
            let mut words = line.split_whitespace();
            match words.next() {
                Some("peer") => {
                    let name = words.next().ok_or_else(|| syntax("peer needs a name".into()))?;
                    let mut spec = PeerSpec::new(name);
                    for w in words {
                        match w.split_once('=') {
                            None if w == "hub" => spec.hub = true,
                            Some(("policy", v)) => spec.policy = v.parse().map_err(|e| syntax(format!("{e}")))?,
                            Some(("script", v)) => {
                                let path = base.join(v);
                                let body = std::fs::read_to_string(&path).map_err(|source| ScenarioError::Io {
                                    path: path.display().to_string(),
                                    source,
                                })?;
                                spec.script.extend(
                                    body.lines()
                                        .map(str::trim)
                                        .filter(|l| !l.is_empty() && !l.starts_with('#'))
                                        .map(str::to_owned),
                                );
                            }
                            _ => return Err(syntax(format!("unknown peer option {w:?}"))),
                        }
                    }
                    if s.index_of(name).is_some() {
                        return Err(ScenarioError::DuplicatePeer(name.into()));
                    }
                    s.peers.push(spec);
                }
                Some("link") => {
                    let (Some(a), Some(b), None) = (words.next(), words.next(), words.next()) else {
                        return Err(syntax("link takes two peer names".into()));
                    };
                    s.links.push((a.into(), b.into()));
                }
                Some("at") => {
                    let name = words.next().ok_or_else(|| syntax("at needs a peer name".into()))?;
                    let rest = line.splitn(3, char::is_whitespace).nth(2).unwrap_or("").trim();
                    let idx = s
                        .index_of(name)
                        .ok_or_else(|| ScenarioError::UnknownPeer(name.into()))?;
                    s.peers[idx].script.push(rest.to_owned());
                }
                Some("budget") => {
                    let v = words.next().and_then(|v| v.parse().ok());
                    s.event_budget = v.ok_or_else(|| syntax("budget takes a number".into()))?;
                }
                Some(other) => return Err(syntax(format!("unknown directive {other:?}"))),
                None => unreachable!("blank lines skipped"),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}
