//! Simulated network conditions.

use std::fmt;
use std::str::FromStr;

use molsync_core::Kind;
use serde::Serialize;

/// Which frames the loss rate applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossScope {
    /// Rotation and state frames.
    #[default]
    Snapshots,
    Rotations,
    /// Every frame, including commands, chat and files.
    Uniform,
}

impl LossScope {
    pub fn covers(self, kind: Kind) -> bool {
        match self {
            LossScope::Snapshots => kind.is_snapshot(),
            LossScope::Rotations => kind == Kind::Rotation,
            LossScope::Uniform => true,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            LossScope::Snapshots => "snapshots",
            LossScope::Rotations => "rotations",
            LossScope::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetProfile {
    /// Mean one-way peer-to-peer latency.
    pub latency_ms: f64,
    /// Half-width of the uniform jitter around the mean.
    pub jitter_ms: f64,
    pub loss_rate: f64,
    pub loss_scope: LossScope,
    /// Let snapshot frames overtake each other. Other kinds always arrive
    /// in order.
    pub reorder: bool,
    pub seed: u64,
}

impl Default for NetProfile {
    fn default() -> Self {
        Self {
            latency_ms: 0.0,
            jitter_ms: 0.0,
            loss_rate: 0.0,
            loss_scope: LossScope::Snapshots,
            reorder: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("unknown profile key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("expected key=value, got {0:?}")]
    Syntax(String),
    #[error("{0}")]
    OutOfRange(&'static str),
}

impl NetProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        if !(self.latency_ms.is_finite() && self.latency_ms >= 0.0) {
            return Err(ProfileError::OutOfRange("latency must be >= 0"));
        }
        if !(self.jitter_ms.is_finite() && self.jitter_ms >= 0.0) {
            return Err(ProfileError::OutOfRange("jitter must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.loss_rate) {
            return Err(ProfileError::OutOfRange("loss must be in [0, 1)"));
        }
        Ok(())
    }

    /// Sets one `key=value` field. Keys: lat, jit, loss, scope, reorder, seed.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ProfileError> {
        let bad = || ProfileError::BadValue {
            key: key.into(),
            value: value.into(),
        };
        match key {
            "lat" | "latency" => self.latency_ms = value.parse().map_err(|_| bad())?,
            "jit" | "jitter" => self.jitter_ms = value.parse().map_err(|_| bad())?,
            "loss" => self.loss_rate = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "reorder" => {
                self.reorder = match value {
                    "1" | "true" | "on" => true,
                    "0" | "false" | "off" => false,
                    _ => return Err(bad()),
                }
            }
            "scope" => {
                self.loss_scope = match value {
                    "snapshots" => LossScope::Snapshots,
                    "rotations" => LossScope::Rotations,
                    "uniform" => LossScope::Uniform,
                    _ => return Err(bad()),
                }
            }
            _ => return Err(ProfileError::UnknownKey(key.into())),
        }
        Ok(())
    }
}

impl FromStr for NetProfile {
    type Err = ProfileError;

    /// `lat=100,jit=20,loss=0,seed=7`; omitted keys keep their defaults.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = NetProfile::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| ProfileError::Syntax(part.into()))?;
            p.set(k.trim(), v.trim())?;
        }
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for NetProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lat={},jit={},loss={},scope={},reorder={},seed={}",
            self.latency_ms,
            self.jitter_ms,
            self.loss_rate,
            self.loss_scope.as_str(),
            u8::from(self.reorder),
            self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_roundtrip() {
        let p: NetProfile = "lat=100,jit=20,loss=0.05,seed=7,scope=rotations,reorder=1"
            .parse()
            .unwrap();
        assert_eq!(p.latency_ms, 100.0);
        assert_eq!(p.loss_scope, LossScope::Rotations);
        assert!(p.reorder);
        assert_eq!(p.to_string().parse::<NetProfile>().unwrap(), p);
    }

    #[test]
    fn rejects_bad_profiles() {
        for bad in [
            "lat=-1",
            "loss=1",
            "loss=x",
            "bandwidth=3",
            "lat",
            "scope=some",
            "jit=inf",
        ] {
            assert!(bad.parse::<NetProfile>().is_err(), "{bad}");
        }
    }

    #[test]
    fn scopes() {
        assert!(LossScope::Snapshots.covers(Kind::State));
        assert!(!LossScope::Snapshots.covers(Kind::Command));
        assert!(!LossScope::Rotations.covers(Kind::State));
        assert!(LossScope::Uniform.covers(Kind::FileChunk));
    }
}
