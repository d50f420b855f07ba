//! The Phase II transmission schedule.
//!
//! Every participant contributes a random value; the seed is the hash of all
//! contributions, so no single participant can steer the order. The
//! schedule is `probes` independent permutations of the roster laid end to
//! end, which bounds the gap between two probes of one identity by twice
//! the roster size.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ids::IdentityId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeSchedule {
    pub seed: [u8; 32],
    /// Identity asked to transmit in each slot.
    pub order: Vec<IdentityId>,
    pub probes: usize,
}

/// Hash of every (identity, value) contribution, taken in identity order.
pub fn schedule_seed(contributions: &[(IdentityId, [u8; 32])]) -> [u8; 32] {
    let mut sorted = contributions.to_vec();
    sorted.sort_by_key(|c| c.0);
    let mut h = Sha256::new();
    for (id, v) in &sorted {
        h.update(id.0.to_le_bytes());
        h.update(v);
    }
    h.finalize().into()
}

impl ProbeSchedule {
    pub fn build(contributions: &[(IdentityId, [u8; 32])], probes: usize) -> Result<Self> {
        if probes == 0 {
            return Err(Error::Config("at least one probe per identity is needed".into()));
        }
        let mut roster: Vec<IdentityId> = contributions.iter().map(|c| c.0).collect();
        roster.sort_unstable();
        if let Some(w) = roster.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateIdentity(w[0]));
        }
        let seed = schedule_seed(contributions);
        let mut rng = ChaCha8Rng::from_seed(seed);
        let mut order = Vec::with_capacity(roster.len() * probes);
        for _ in 0..probes {
            let mut perm = roster.clone();
            perm.shuffle(&mut rng);
            order.extend(perm);
        }
        Ok(Self { seed, order, probes })
    }

    /// Largest number of slots between consecutive probes of one identity.
    pub fn max_gap(&self) -> usize {
        let mut last = std::collections::HashMap::new();
        let mut gap = 0;
        for (slot, id) in self.order.iter().enumerate() {
            if let Some(prev) = last.insert(*id, slot) {
                gap = gap.max(slot - prev);
            }
        }
        gap
    }
}
