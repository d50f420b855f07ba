//! Protocol messages and their digests.

use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::ids::IdentityId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    Request,
    HelloI,
    Ack,
    RandContrib,
    Transmit,
    HelloII,
    Commit,
    Reveal,
}

impl MessageKind {
    pub const ALL: [MessageKind; 8] = [
        MessageKind::Request,
        MessageKind::HelloI,
        MessageKind::Ack,
        MessageKind::RandContrib,
        MessageKind::Transmit,
        MessageKind::HelloII,
        MessageKind::Commit,
        MessageKind::Reveal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Request => "REQUEST",
            MessageKind::HelloI => "HELLO_I",
            MessageKind::Ack => "ACK",
            MessageKind::RandContrib => "RAND_CONTRIB",
            MessageKind::Transmit => "TRANSMIT",
            MessageKind::HelloII => "HELLO_II",
            MessageKind::Commit => "COMMIT",
            MessageKind::Reveal => "REVEAL",
        }
    }

    /// Whether the message carries a signature binding it to its sender.
    pub fn signed(self) -> bool {
        matches!(self, MessageKind::RandContrib | MessageKind::Commit | MessageKind::Reveal)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MessageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown message kind {s:?}")))
    }
}

/// One transmission on the channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: IdentityId,
    pub t_ms: u64,
    pub payload: Vec<u8>,
}

impl Message {
    pub fn new(kind: MessageKind, sender: IdentityId, t_ms: u64, payload: Vec<u8>) -> Self {
        Self { kind, sender, t_ms, payload }
    }

    pub fn digest(&self) -> [u8; 32] {
        sha256(&self.payload)
    }
}

pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_hex32(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 || !s.is_ascii() {
        return None;
    }
    let mut out = [0u8; 32];
    for (k, b) in out.iter_mut().enumerate() {
        *b = u8::from_str_radix(&s[2 * k..2 * k + 2], 16).ok()?;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip_through_names() {
        for k in MessageKind::ALL {
            assert_eq!(k.name().parse::<MessageKind>().unwrap(), k);
        }
        assert!("HELLO".parse::<MessageKind>().is_err());
    }

    #[test]
    fn digest_of_empty_payload() {
        let m = Message::new(MessageKind::Request, IdentityId(0), 0, vec![]);
        assert_eq!(hex(&m.digest()), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(parse_hex32(&hex(&m.digest())), Some(m.digest()));
        assert_eq!(parse_hex32("zz"), None);
    }
}
