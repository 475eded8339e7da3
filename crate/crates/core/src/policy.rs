//! Send/apply toggles and the gating map.

use std::fmt;
use std::str::FromStr;

use crate::envelope::Kind;

/// Which view updates a peer transmits and which incoming ones it applies.
/// All six flags are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Policy {
    pub send_rotations: bool,
    pub send_states: bool,
    pub send_commands: bool,
    pub apply_rotations: bool,
    pub apply_states: bool,
    pub apply_commands: bool,
}

impl Default for Policy {
    fn default() -> Self {
        Self {
            send_rotations: true,
            send_states: true,
            send_commands: true,
            apply_rotations: true,
            apply_states: true,
            apply_commands: true,
        }
    }
}

impl Policy {
    /// Builds a policy from a six-bit mask, bit 0 = `send_rotations` through
    /// bit 5 = `apply_commands`.
    pub fn from_bits(bits: u8) -> Self {
        let f = |i: u8| bits & (1 << i) != 0;
        Self {
            send_rotations: f(0),
            send_states: f(1),
            send_commands: f(2),
            apply_rotations: f(3),
            apply_states: f(4),
            apply_commands: f(5),
        }
    }

    /// Every one of the 64 policies.
    pub fn all() -> impl Iterator<Item = Policy> {
        (0u8..64).map(Policy::from_bits)
    }
}

/// Whether a locally produced envelope of `kind` may be transmitted.
pub fn gate_outbound(kind: Kind, p: &Policy) -> bool {
    match kind {
        Kind::Rotation => p.send_rotations,
        Kind::State => p.send_states,
        Kind::Command => p.send_commands,
        _ => true,
    }
}

/// Whether a received envelope of `kind` may be applied locally.
pub fn gate_inbound(kind: Kind, p: &Policy) -> bool {
    match kind {
        Kind::Rotation => p.apply_rotations,
        Kind::State => p.apply_states,
        Kind::Command => p.apply_commands,
        _ => true,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid policy {0:?}: expected r,s,c/r,s,c with each flag 0 or 1")]
pub struct ParsePolicyError(pub String);

/// Text form `r,s,c/r,s,c`: the send triple, then the apply triple.
impl FromStr for Policy {
    type Err = ParsePolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParsePolicyError(s.to_owned());
        let triple = |part: &str| -> Result<[bool; 3], ParsePolicyError> {
            let flags: Vec<bool> = part
                .split(',')
                .map(|f| match f.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    _ => Err(err()),
                })
                .collect::<Result<_, _>>()?;
            flags.try_into().map_err(|_| err())
        };
        let (send, apply) = s.split_once('/').ok_or_else(err)?;
        let [send_rotations, send_states, send_commands] = triple(send)?;
        let [apply_rotations, apply_states, apply_commands] = triple(apply)?;
        Ok(Policy {
            send_rotations,
            send_states,
            send_commands,
            apply_rotations,
            apply_states,
            apply_commands,
        })
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = |v: bool| if v { '1' } else { '0' };
        write!(
            f,
            "{},{},{}/{},{},{}",
            b(self.send_rotations),
            b(self.send_states),
            b(self.send_commands),
            b(self.apply_rotations),
            b(self.apply_states),
            b(self.apply_commands)
        )
    }
}
