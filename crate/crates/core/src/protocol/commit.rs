//! Observation logs and the commitments that bind them.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ids::IdentityId;

/// Everything one identity claims to have heard, keyed by (transmitter,
/// probe index).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLog {
    pub observer: IdentityId,
    pub entries: BTreeMap<(IdentityId, usize), f64>,
}

impl ObservationLog {
    pub fn new(observer: IdentityId) -> Self {
        Self { observer, entries: BTreeMap::new() }
    }

    pub fn record(&mut self, transmitter: IdentityId, probe: usize, rssi: f64) {
        self.entries.insert((transmitter, probe), rssi);
    }

    /// Canonical bytes: (observer, transmitter, probe, rssi in hundredths
    /// of a dBm) as little-endian u32, u32, u32, i32, sorted.
    pub fn canonical_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(self.entries.len() * 16);
        for (&(tx, probe), &v) in &self.entries {
            let centi = (v * 100.0).round();
            if !centi.is_finite() || centi.abs() > i32::MAX as f64 {
                return Err(Error::Domain(format!("rssi {v} cannot be serialized")));
            }
            let probe = u32::try_from(probe).map_err(|_| Error::Domain(format!("probe index {probe} too large")))?;
            out.extend_from_slice(&self.observer.0.to_le_bytes());
            out.extend_from_slice(&tx.0.to_le_bytes());
            out.extend_from_slice(&probe.to_le_bytes());
            out.extend_from_slice(&(centi as i32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 16 != 0 {
            return Err(Error::Domain("observation log length is not a multiple of 16".into()));
        }
        let word = |c: &[u8], k: usize| [c[4 * k], c[4 * k + 1], c[4 * k + 2], c[4 * k + 3]];
        let mut log: Option<Self> = None;
        for c in bytes.chunks_exact(16) {
            let observer = IdentityId(u32::from_le_bytes(word(c, 0)));
            let l = log.get_or_insert_with(|| Self::new(observer));
            if l.observer != observer {
                return Err(Error::Domain("observation log mixes observers".into()));
            }
            let tx = IdentityId(u32::from_le_bytes(word(c, 1)));
            let probe = u32::from_le_bytes(word(c, 2)) as usize;
            let v = i32::from_le_bytes(word(c, 3)) as f64 / 100.0;
            l.record(tx, probe, v);
        }
        Ok(log.unwrap_or_else(|| Self::new(IdentityId(0))))
    }

    pub fn commitment(&self) -> Result<[u8; 32]> {
        Ok(Sha256::digest(self.canonical_bytes()?).into())
    }
}

/// Whether revealed bytes match a commitment.
pub fn opens(commitment: &[u8; 32], revealed: &[u8]) -> bool {
    let d: [u8; 32] = Sha256::digest(revealed).into();
    &d == commitment
}
