use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{pair_within, ObservationMatrix, SignalprintThresholds, UnionFind};
use crate::error::{Error, Result};
use crate::ids::IdentityId;
use crate::scalar::Scalar;

/// Identities whose reported observations form the signalprints of a view.
/// The first member is always the initiator.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReceiverSet {
    members: Vec<IdentityId>,
}

impl ReceiverSet {
    pub fn new(members: Vec<IdentityId>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::InvalidReceiverSet(format!("needs at least 2 members, got {}", members.len())));
        }
        for (i, m) in members.iter().enumerate() {
            if members[..i].contains(m) {
                return Err(Error::DuplicateIdentity(*m));
            }
        }
        Ok(Self { members })
    }

    /// The two-member set `{initiator, other}`.
    pub fn pair(initiator: IdentityId, other: IdentityId) -> Result<Self> {
        Self::new(vec![initiator, other])
    }

    pub fn initiator(&self) -> IdentityId {
        self.members[0]
    }

    pub fn members(&self) -> &[IdentityId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, id: IdentityId) -> bool {
        self.members.contains(&id)
    }

    /// This set with `id` appended.
    pub fn extended(&self, id: IdentityId) -> Result<Self> {
        let mut members = self.members.clone();
        members.push(id);
        Self::new(members)
    }

    /// Members in identity order, for order-insensitive comparison.
    pub fn sorted_members(&self) -> Vec<IdentityId> {
        let mut m = self.members.clone();
        m.sort_unstable();
        m
    }
}

/// A Sybil / non-Sybil labeling of identities. Identities with too few
/// reports to form a signalprint are kept apart in `rejected`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct View {
    pub sybil: BTreeSet<IdentityId>,
    pub nonsybil: BTreeSet<IdentityId>,
    pub rejected: BTreeSet<IdentityId>,
}

impl View {
    /// Identities not accepted as non-Sybil: Sybil plus rejected.
    pub fn claimed_sybil(&self) -> usize {
        self.sybil.len() + self.rejected.len()
    }

    pub fn is_nonsybil(&self, id: IdentityId) -> bool {
        self.nonsybil.contains(&id)
    }

    /// Identities treated as Sybil downstream (Sybil or rejected).
    pub fn is_sybil_like(&self, id: IdentityId) -> bool {
        self.sybil.contains(&id) || self.rejected.contains(&id)
    }

    /// Copy of this view with `ids` moved out of the non-Sybil set and into
    /// `rejected`.
    pub fn with_rejected(&self, ids: impl IntoIterator<Item = IdentityId>) -> Self {
        let mut v = self.clone();
        for id in ids {
            if v.nonsybil.remove(&id) || v.sybil.remove(&id) {
                v.rejected.insert(id);
            }
        }
        v
    }
}

/// Labels every identity of `obs` using the signalprints that the members
/// of `r` report.
///
/// Each non-member gets one signalprint: per member, the mean of its reported
/// probes. Non-members seen by fewer than two members are rejected. The rest
/// are grouped by the transitive closure of [`super::is_sybil_pair`]; groups
/// of two or more are Sybil. Members of `r` are always non-Sybil.
pub fn generate_view<S: Scalar>(r: &ReceiverSet, obs: &ObservationMatrix<S>, t: &SignalprintThresholds<S>) -> View {
    generate_view_with_clusters(r, obs, t).0
}

/// [`generate_view`] plus the Sybil groups, each sorted by identity.
pub fn generate_view_with_clusters<S: Scalar>(
    r: &ReceiverSet,
    obs: &ObservationMatrix<S>,
    t: &SignalprintThresholds<S>,
) -> (View, Vec<Vec<IdentityId>>) {
    let n = obs.len();
    let member_idx: Vec<Option<usize>> = r.members().iter().map(|m| obs.index_of(*m)).collect();
    let mut is_member = vec![false; n];
    for m in member_idx.iter().flatten() {
        is_member[*m] = true;
    }

    let mut view = View::default();
    let mut prints: Vec<(usize, Vec<Option<S>>)> = Vec::with_capacity(n);
    for x in 0..n {
        let id = obs.identities()[x];
        if is_member[x] {
            view.nonsybil.insert(id);
            continue;
        }
        let values: Vec<Option<S>> = member_idx.iter().map(|m| m.and_then(|m| obs.mean_at(m, x))).collect();
        if values.iter().filter(|v| v.is_some()).count() < 2 {
            view.rejected.insert(id);
        } else {
            prints.push((x, values));
        }
    }

    let mut uf = UnionFind::new(prints.len());
    if member_idx.len() == 2 {
        // Two observers: each line is fixed by the offset v0 − v1, so single
        // linkage only needs neighbours in offset order.
        let mut order: Vec<usize> = (0..prints.len()).collect();
        let offset = |k: usize| {
            let v = &prints[k].1;
            v[0].zip(v[1]).map(|(a, b)| a - b).unwrap_or_else(S::zero)
        };
        order.sort_by(|&a, &b| offset(a).partial_cmp(&offset(b)).unwrap_or(std::cmp::Ordering::Equal));
        for w in order.windows(2) {
            if let Ok(true) = pair_within(&prints[w[0]].1, &prints[w[1]].1, t) {
                uf.union(w[0], w[1]);
            }
        }
    } else {
        for a in 0..prints.len() {
            for b in a + 1..prints.len() {
                if uf.find(a) == uf.find(b) {
                    continue;
                }
                // Pairs sharing fewer than two observers cannot be compared.
                if let Ok(true) = pair_within(&prints[a].1, &prints[b].1, t) {
                    uf.union(a, b);
                }
            }
        }
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<IdentityId>> = Default::default();
    for (k, (x, _)) in prints.iter().enumerate() {
        let id = obs.identities()[*x];
        if uf.set_size(k) >= 2 {
            view.sybil.insert(id);
            groups.entry(uf.find(k)).or_default().push(id);
        } else {
            view.nonsybil.insert(id);
        }
    }
    let mut clusters: Vec<Vec<IdentityId>> = groups.into_values().collect();
    clusters.sort();
    (view, clusters)
}
