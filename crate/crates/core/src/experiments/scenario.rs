//! Random worlds drawn from a scenario.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::AttackerKind;
use crate::channel::{mix, Mobility, NodeState, PhysicalNode, Role};
use crate::error::{Error, Result};
use crate::ids::{IdentityId, NodeId};
use crate::world::{Identity, World};

use super::ScenarioConfig;

fn place(rng: &mut ChaCha8Rng, side: f64, min_sep: f64, taken: &[[f64; 2]]) -> Result<[f64; 2]> {
    for _ in 0..10_000 {
        let p = [rng.random::<f64>() * side, rng.random::<f64>() * side];
        if taken.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= min_sep) {
            return Ok(p);
        }
    }
    Err(Error::Config(format!("cannot place {} radios {min_sep} m apart in a {side} m square", taken.len() + 1)))
}

/// Builds the world of one trial. The initiator is identity 0 on a
/// conforming radio at the center; every other identity number is assigned
/// at random.
pub fn build_world(cfg: &ScenarioConfig, seed: u64) -> Result<World> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = cfg.geometry.area;
    let mut nodes = Vec::new();
    let mut positions = vec![[side / 2.0, side / 2.0]];
    let mut initiator = PhysicalNode::stationary(NodeId(0), positions[0], Role::Conforming);
    initiator.tx_power = rng.random_range(0..=20) as f64;
    nodes.push(initiator);

    let mut add = |role: Role, rng: &mut ChaCha8Rng, nodes: &mut Vec<PhysicalNode>| -> Result<NodeId> {
        let p = place(rng, side, cfg.geometry.min_separation, &positions)?;
        positions.push(p);
        let id = NodeId(nodes.len() as u32);
        let mut n = PhysicalNode::stationary(id, p, role);
        n.tx_power = rng.random_range(0..=20) as f64;
        n.orientation = rng.random_range(0.0..360.0);
        if role == Role::Conforming && cfg.geometry.conforming_jitter > 0.0 {
            n.mobility = Mobility::Jitter { amplitude: cfg.geometry.conforming_jitter };
        }
        nodes.push(n);
        Ok(id)
    };

    // (node, tx power, mobile home) per non-initiator identity.
    let mut claims: Vec<(NodeId, f64, Option<NodeState>)> = Vec::new();
    for _ in 0..cfg.counts.conforming {
        let id = add(Role::Conforming, &mut rng, &mut nodes)?;
        claims.push((id, nodes[id.0 as usize].tx_power, None));
    }
    for _ in 0..cfg.counts.lying_nonsybil {
        let id = add(Role::LyingNonsybil, &mut rng, &mut nodes)?;
        claims.push((id, nodes[id.0 as usize].tx_power, None));
    }
    let mobile = cfg.attacker.kind == AttackerKind::Mobile;
    for _ in 0..cfg.counts.attacker_nodes {
        let id = add(Role::SybilAttacker, &mut rng, &mut nodes)?;
        let base = nodes[id.0 as usize].state();
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        for k in 0..cfg.attacker.sybils_per_node {
            let home = mobile.then(|| {
                let d = cfg.attacker.position_spacing * k as f64;
                NodeState { position: [base.position[0] + d * heading.cos(), base.position[1] + d * heading.sin()], orientation: base.orientation }
            });
            claims.push((id, rng.random_range(0..=20) as f64, home));
        }
    }

    let mut numbers: Vec<u32> = (1..=claims.len() as u32).collect();
    numbers.shuffle(&mut rng);
    let mut identities = vec![Identity { id: IdentityId(0), node: NodeId(0), tx_power: nodes[0].tx_power, home: None }];
    for ((node, tx_power, home), n) in claims.into_iter().zip(numbers) {
        identities.push(Identity { id: IdentityId(n), node, tx_power, home });
    }
    let mut world = World::new(nodes, identities, cfg.channel.clone(), IdentityId(0), mix(seed ^ 0x5eed))?;
    world.attacker = cfg.attacker.clone();
    world.reveal = cfg.reveal;
    world.jamming = cfg.jamming;
    Ok(world)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Truth;

    #[test]
    fn counts_and_truth_match_the_scenario() {
        let mut cfg = ScenarioConfig::default();
        cfg.counts.lying_nonsybil = 2;
        cfg.counts.attacker_nodes = 2;
        let w = build_world(&cfg, 9).unwrap();
        assert_eq!(w.identities.len(), 1 + 10 + 2 + 8);
        assert_eq!(w.with_truth(Truth::Sybil).len(), 8);
        assert_eq!(w.with_truth(Truth::LyingNonsybil).len(), 2);
        assert_eq!(w.truth(IdentityId(0)), Some(Truth::Conforming));
        assert_eq!(build_world(&cfg, 9).unwrap(), w);
        assert_ne!(build_world(&cfg, 10).unwrap(), w);
    }

    #[test]
    fn crowded_area_is_a_config_error() {
        let mut cfg = ScenarioConfig::default();
        cfg.geometry.area = 1.0;
        cfg.geometry.min_separation = 2.0;
        assert!(matches!(build_world(&cfg, 1), Err(Error::Config(_))));
    }
}
