use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::ids::IdentityId;
use crate::scalar::Scalar;

/// Reported RSSI values indexed by (observer, transmitter, probe).
///
/// Entries are `None` when the observer did not hear the probe, or when its
/// reports were rejected. Rows are what each observer *claims*; only the
/// initiator's own row is trusted.
#[derive(Debug, Clone)]
pub struct ObservationMatrix<S> {
    identities: Vec<IdentityId>,
    probes: usize,
    values: Vec<Option<S>>,
    means: OnceLock<Vec<Option<S>>>,
}

impl<S: Scalar> ObservationMatrix<S> {
    /// An empty matrix over `identities` (sorted and deduplicated) with
    /// `probes` probes per transmitter.
    pub fn new(identities: impl IntoIterator<Item = IdentityId>, probes: usize) -> Result<Self> {
        let mut ids: Vec<IdentityId> = identities.into_iter().collect();
        ids.sort_unstable();
        for w in ids.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateIdentity(w[0]));
            }
        }
        if probes == 0 {
            return Err(Error::Config("observation matrix needs at least one probe".into()));
        }
        let n = ids.len();
        Ok(Self {
            identities: ids,
            probes,
            values: vec![None; n * n * probes],
            means: OnceLock::new(),
        })
    }

    pub fn identities(&self) -> &[IdentityId] {
        &self.identities
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    pub fn probes(&self) -> usize {
        self.probes
    }

    pub fn index_of(&self, id: IdentityId) -> Option<usize> {
        self.identities.binary_search(&id).ok()
    }

    fn require(&self, id: IdentityId) -> Result<usize> {
        self.index_of(id).ok_or(Error::UnknownIdentity(id))
    }

    fn slot(&self, observer: usize, transmitter: usize) -> usize {
        (observer * self.identities.len() + transmitter) * self.probes
    }

    pub fn set(
        &mut self,
        observer: IdentityId,
        transmitter: IdentityId,
        probe: usize,
        value: Option<S>,
    ) -> Result<()> {
        if probe >= self.probes {
            return Err(Error::ProbeOutOfRange { index: probe, probes: self.probes });
        }
        let o = self.require(observer)?;
        let t = self.require(transmitter)?;
        let slot = self.slot(o, t) + probe;
        self.values[slot] = value;
        self.means.take();
        Ok(())
    }

    /// Overwrites every probe of (observer, transmitter) with one value.
    pub fn set_all_probes(&mut self, observer: IdentityId, transmitter: IdentityId, value: Option<S>) -> Result<()> {
        let o = self.require(observer)?;
        let t = self.require(transmitter)?;
        let start = self.slot(o, t);
        self.values[start..start + self.probes].fill(value);
        self.means.take();
        Ok(())
    }

    pub fn get(&self, observer: IdentityId, transmitter: IdentityId, probe: usize) -> Option<S> {
        let o = self.index_of(observer)?;
        let t = self.index_of(transmitter)?;
        if probe >= self.probes {
            return None;
        }
        self.values[self.slot(o, t) + probe]
    }

    /// Per-probe series reported by `observer` for `transmitter`.
    pub fn series(&self, observer: IdentityId, transmitter: IdentityId) -> Option<&[Option<S>]> {
        let o = self.index_of(observer)?;
        let t = self.index_of(transmitter)?;
        let start = self.slot(o, t);
        Some(&self.values[start..start + self.probes])
    }

    /// Drops every value reported by `observer`.
    pub fn clear_row(&mut self, observer: IdentityId) -> Result<()> {
        let o = self.require(observer)?;
        let n = self.identities.len();
        let start = self.slot(o, 0);
        self.values[start..start + n * self.probes].fill(None);
        self.means.take();
        Ok(())
    }

    fn means(&self) -> &[Option<S>] {
        self.means.get_or_init(|| {
            self.values
                .chunks(self.probes)
                .map(|probes| {
                    let mut sum = S::zero();
                    let mut count = 0usize;
                    for v in probes.iter().flatten() {
                        sum = sum + *v;
                        count += 1;
                    }
                    (count > 0).then(|| sum / S::from_count(count))
                })
                .collect()
        })
    }

    /// Mean over the probes `observer` reported for `transmitter`.
    pub fn mean(&self, observer: IdentityId, transmitter: IdentityId) -> Option<S> {
        let o = self.index_of(observer)?;
        let t = self.index_of(transmitter)?;
        self.mean_at(o, t)
    }

    /// Same as [`mean`](Self::mean) but by matrix index.
    pub fn mean_at(&self, observer: usize, transmitter: usize) -> Option<S> {
        self.means()[observer * self.identities.len() + transmitter]
    }

    /// Sub-matrix over the given identities (unknown ones are an error).
    pub fn restrict(&self, keep: &[IdentityId]) -> Result<Self> {
        let mut out = Self::new(keep.iter().copied(), self.probes)?;
        let idx: Vec<usize> = out
            .identities
            .iter()
            .map(|id| self.require(*id))
            .collect::<Result<_>>()?;
        for (no, &o) in idx.iter().enumerate() {
            for (nt, &t) in idx.iter().enumerate() {
                let src = self.slot(o, t);
                let dst = out.slot(no, nt);
                out.values[dst..dst + self.probes].copy_from_slice(&self.values[src..src + self.probes]);
            }
        }
        Ok(out)
    }

    /// Converts every entry into another scalar type.
    pub fn convert<T: Scalar>(&self) -> ObservationMatrix<T> {
        ObservationMatrix {
            identities: self.identities.clone(),
            probes: self.probes,
            values: self
                .values
                .iter()
                .map(|v| v.map(|x| T::from_f64_lossy(x.to_f64_lossy())))
                .collect(),
            means: OnceLock::new(),
        }
    }

    /// Every present entry as `(observer, transmitter, probe, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (IdentityId, IdentityId, usize, S)> + '_ {
        let n = self.identities.len();
        let p = self.probes;
        self.values.iter().enumerate().filter_map(move |(i, v)| {
            v.map(|v| {
                let probe = i % p;
                let t = (i / p) % n;
                let o = i / (p * n);
                (self.identities[o], self.identities[t], probe, v)
            })
        })
    }
}
