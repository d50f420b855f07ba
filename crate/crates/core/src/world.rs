//! Ground truth for one trial: physical radios, the identities they claim,
//! and how each behaves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adversary::AttackerStrategy;
use crate::channel::{ChannelModel, NodeState, PhysicalNode, Role};
use crate::error::{Error, Result};
use crate::ids::{IdentityId, NodeId};

/// One claimed identity and the radio behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identity {
    pub id: IdentityId,
    pub node: NodeId,
    /// Transmit power used for this identity's probes, dBm.
    pub tx_power: f64,
    /// Where a mobile attacker tries to be when answering for this identity.
    pub home: Option<NodeState>,
}

/// What an identity actually is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Truth {
    Conforming,
    LyingNonsybil,
    Sybil,
}

impl Truth {
    pub fn is_sybil(self) -> bool {
        self == Truth::Sybil
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RevealBehavior {
    #[default]
    Honest,
    /// Reveals values that differ from the commitment.
    Mismatch,
    Withhold,
}

/// A jammer that keeps one identity's messages from being received.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "phase")]
pub enum Jamming {
    /// Collides with every HELLO-I of `victim`.
    Hello { victim: u32 },
    /// Collides with every COMMIT and REVEAL of `victim`.
    Reports { victim: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub nodes: Vec<PhysicalNode>,
    /// Sorted by identity.
    pub identities: Vec<Identity>,
    pub channel: ChannelModel,
    pub initiator: IdentityId,
    pub attacker: AttackerStrategy,
    pub reveal: RevealBehavior,
    pub jamming: Option<Jamming>,
    /// Seeds the shadowing field.
    pub seed: u64,
}

impl World {
    pub fn new(nodes: Vec<PhysicalNode>, mut identities: Vec<Identity>, channel: ChannelModel, initiator: IdentityId, seed: u64) -> Result<Self> {
        identities.sort_by_key(|i| i.id);
        for w in identities.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::DuplicateIdentity(w[0].id));
            }
        }
        for (k, n) in nodes.iter().enumerate() {
            if n.id.0 as usize != k {
                return Err(Error::Config(format!("node ids must be dense, found {} at {k}", n.id)));
            }
            n.validate()?;
        }
        if let Some(bad) = identities.iter().find(|i| i.node.0 as usize >= nodes.len()) {
            return Err(Error::Config(format!("{} is claimed by unknown {}", bad.id, bad.node)));
        }
        let world = Self {
            nodes,
            identities,
            channel,
            initiator,
            attacker: AttackerStrategy::default(),
            reveal: RevealBehavior::Honest,
            jamming: None,
            seed,
        };
        if world.identity(initiator).is_none() {
            return Err(Error::UnknownIdentity(initiator));
        }
        Ok(world)
    }

    pub fn identity(&self, id: IdentityId) -> Option<&Identity> {
        self.identities.binary_search_by_key(&id, |i| i.id).ok().map(|k| &self.identities[k])
    }

    pub fn ids(&self) -> Vec<IdentityId> {
        self.identities.iter().map(|i| i.id).collect()
    }

    pub fn node_of(&self, id: IdentityId) -> Option<&PhysicalNode> {
        self.identity(id).map(|i| &self.nodes[i.node.0 as usize])
    }

    fn claims(&self) -> BTreeMap<NodeId, usize> {
        let mut m = BTreeMap::new();
        for i in &self.identities {
            *m.entry(i.node).or_insert(0) += 1;
        }
        m
    }

    /// Identities of a radio claiming several of them are all Sybil; a
    /// radio with one identity is conforming or a lying non-Sybil.
    pub fn truth(&self, id: IdentityId) -> Option<Truth> {
        let ident = self.identity(id)?;
        let claims = self.claims()[&ident.node];
        let node = &self.nodes[ident.node.0 as usize];
        Some(if claims >= 2 {
            Truth::Sybil
        } else if node.role == Role::Conforming {
            Truth::Conforming
        } else {
            Truth::LyingNonsybil
        })
    }

    /// Ground truth for every identity at once.
    pub fn truths(&self) -> BTreeMap<IdentityId, Truth> {
        let claims = self.claims();
        self.identities
            .iter()
            .map(|i| {
                let node = &self.nodes[i.node.0 as usize];
                let t = if claims[&i.node] >= 2 {
                    Truth::Sybil
                } else if node.role == Role::Conforming {
                    Truth::Conforming
                } else {
                    Truth::LyingNonsybil
                };
                (i.id, t)
            })
            .collect()
    }

    /// Identities whose reports are not the radio's real observations.
    pub fn lies(&self, id: IdentityId) -> bool {
        self.node_of(id).is_some_and(|n| n.role != Role::Conforming)
    }

    pub fn with_truth(&self, t: Truth) -> Vec<IdentityId> {
        self.truths().into_iter().filter(|(_, v)| *v == t).map(|(k, _)| k).collect()
    }
}
