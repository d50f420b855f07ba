//! Line-oriented protocol traces and their phase grammar.
//!
//! Each line is `t_ms kind sender payload_digest`. Lines starting with `#`
//! are comments. Besides message kinds, a trace holds the events
//! `PHASE_I`, `PHASE_II`, `PHASE_III`, `REJECT`, `DROP`, `ABORT` and `DONE`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ids::IdentityId;

use super::message::{hex, parse_hex32, sha256, Message, MessageKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Discovery,
    Probing,
    Reporting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceKind {
    Message(MessageKind),
    Begin(Phase),
    /// An identity is rejected (late or moving).
    Reject,
    /// An identity's reports are discarded.
    Drop,
    Abort,
    Done,
}

impl TraceKind {
    fn name(self) -> &'static str {
        match self {
            TraceKind::Message(k) => k.name(),
            TraceKind::Begin(Phase::Discovery) => "PHASE_I",
            TraceKind::Begin(Phase::Probing) => "PHASE_II",
            TraceKind::Begin(Phase::Reporting) => "PHASE_III",
            TraceKind::Reject => "REJECT",
            TraceKind::Drop => "DROP",
            TraceKind::Abort => "ABORT",
            TraceKind::Done => "DONE",
        }
    }
}

impl FromStr for TraceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "PHASE_I" => TraceKind::Begin(Phase::Discovery),
            "PHASE_II" => TraceKind::Begin(Phase::Probing),
            "PHASE_III" => TraceKind::Begin(Phase::Reporting),
            "REJECT" => TraceKind::Reject,
            "DROP" => TraceKind::Drop,
            "ABORT" => TraceKind::Abort,
            "DONE" => TraceKind::Done,
            other => TraceKind::Message(other.parse()?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceLine {
    pub t_ms: u64,
    pub kind: TraceKind,
    pub sender: IdentityId,
    pub digest: [u8; 32],
}

impl fmt::Display for TraceLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} {}", self.t_ms, self.kind.name(), self.sender.0, hex(&self.digest))
    }
}

impl FromStr for TraceLine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("malformed trace line {s:?}"));
        let f: Vec<&str> = s.split_whitespace().collect();
        let [t, kind, sender, digest] = f[..] else { return Err(bad()) };
        Ok(Self {
            t_ms: t.parse().map_err(|_| bad())?,
            kind: kind.parse()?,
            sender: IdentityId(sender.parse().map_err(|_| bad())?),
            digest: parse_hex32(digest).ok_or_else(bad)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub lines: Vec<TraceLine>,
}

impl Trace {
    pub fn message(&mut self, m: &Message) {
        self.lines.push(TraceLine { t_ms: m.t_ms, kind: TraceKind::Message(m.kind), sender: m.sender, digest: m.digest() });
    }

    /// Records an event; `detail` is hashed into the digest field.
    pub fn event(&mut self, t_ms: u64, kind: TraceKind, sender: IdentityId, detail: &str) {
        self.lines.push(TraceLine { t_ms, kind, sender, digest: sha256(detail.as_bytes()) });
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for l in &self.lines {
            s.push_str(&l.to_string());
            s.push('\n');
        }
        s
    }

    /// Parses rendered lines, skipping blanks and `#` comments. Errors name
    /// the offending line of `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            lines.push(l.parse().map_err(|e| Error::Config(format!("trace line {}: {e}", k + 1)))?);
        }
        Ok(Self { lines })
    }

    pub fn count(&self, kind: TraceKind) -> usize {
        self.lines.iter().filter(|l| l.kind == kind).count()
    }

    /// Checks the phase grammar: phases begin in order, each message kind
    /// appears only in its phase, time never runs backwards, and the trace
    /// ends with exactly one `DONE` or `ABORT`.
    pub fn validate(&self) -> Result<()> {
        use MessageKind::*;
        let err = |k: usize, why: &str| Err(Error::Config(format!("trace line {}: {why}", k + 1)));
        let mut phase: Option<Phase> = None;
        let mut last_t = 0;
        for (k, l) in self.lines.iter().enumerate() {
            if l.t_ms < last_t {
                return err(k, "time runs backwards");
            }
            last_t = l.t_ms;
            let terminal = matches!(l.kind, TraceKind::Done | TraceKind::Abort);
            if terminal != (k + 1 == self.lines.len()) {
                return err(k, "DONE or ABORT must end the trace");
            }
            let ok = match (phase, l.kind) {
                (None, TraceKind::Begin(Phase::Discovery)) => true,
                (Some(Phase::Discovery), TraceKind::Begin(Phase::Probing)) => true,
                (Some(Phase::Probing), TraceKind::Begin(Phase::Reporting)) => true,
                (_, TraceKind::Begin(_)) | (None, _) => false,
                (Some(_), TraceKind::Abort) => true,
                (Some(p), TraceKind::Done) => p == Phase::Reporting,
                (Some(p), TraceKind::Message(m)) => match p {
                    Phase::Discovery => matches!(m, Request | HelloI | Ack),
                    Phase::Probing => matches!(m, RandContrib | Transmit | HelloII),
                    Phase::Reporting => matches!(m, Commit | Reveal),
                },
                (Some(p), TraceKind::Reject) => p != Phase::Discovery,
                (Some(p), TraceKind::Drop) => p == Phase::Reporting,
            };
            if !ok {
                return err(k, &format!("{} not allowed here", l.kind.name()));
            }
            if let TraceKind::Begin(p) = l.kind {
                phase = Some(p);
            }
        }
        if self.lines.is_empty() {
            return Err(Error::Config("empty trace".into()));
        }
        Ok(())
    }
}
