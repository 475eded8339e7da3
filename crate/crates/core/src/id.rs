//! Session identities.
//!
//! A [`PeerId`] is a 16-character alphanumeric token handed out by the relay
//! when a connection says hello. IDs double as capabilities: anyone who knows
//! an ID can connect to that peer, so they must be unguessable in production
//! and reproducible under a fixed seed in tests.

use std::fmt;
use std::str::FromStr;

use rand::distr::{Alphanumeric, SampleString};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Length of every peer ID and file token.
pub const ID_LEN: usize = 16;

/// Deterministic generator used for IDs and file tokens.
pub type IdRng = ChaCha8Rng;

/// Creates an ID generator from a seed.
pub fn seeded_rng(seed: u64) -> IdRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Creates an ID generator seeded from the operating system.
pub fn entropy_rng() -> IdRng {
    ChaCha8Rng::from_os_rng()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid id {value:?}: expected {ID_LEN} characters from [A-Za-z0-9]")]
pub struct InvalidId {
    pub value: String,
}

/// Draws a token of [`ID_LEN`] characters uniformly from `[A-Za-z0-9]`.
pub fn random_token<R: Rng + ?Sized>(rng: &mut R) -> String {
    Alphanumeric.sample_string(rng, ID_LEN)
}

pub(crate) fn is_valid_token(s: &str) -> bool {
    s.len() == ID_LEN && s.bytes().all(|b| b.is_ascii_alphanumeric())
}

/// Identity of one peer for the lifetime of its connection.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeerId(String);

impl PeerId {
    /// Reserved ID used as `from` on envelopes the relay itself originates
    /// and on the initial `hello`, before the client has been assigned one.
    /// The relay never hands it out.
    pub fn server() -> Self {
        PeerId("0000000000000000".to_owned())
    }

    pub fn is_server(&self) -> bool {
        self.0 == "0000000000000000"
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Draws a fresh peer ID. The same seed yields the same sequence of IDs.
pub fn new_peer_id<R: Rng + ?Sized>(rng: &mut R) -> PeerId {
    PeerId(random_token(rng))
}

impl FromStr for PeerId {
    type Err = InvalidId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if is_valid_token(s) {
            Ok(PeerId(s.to_owned()))
        } else {
            Err(InvalidId { value: s.to_owned() })
        }
    }
}

impl TryFrom<String> for PeerId {
    type Error = InvalidId;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if is_valid_token(&s) {
            Ok(PeerId(s))
        } else {
            Err(InvalidId { value: s })
        }
    }
}

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PeerId({})", self.0)
    }
}

impl Serialize for PeerId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for PeerId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        PeerId::try_from(s).map_err(serde::de::Error::custom)
    }
}
