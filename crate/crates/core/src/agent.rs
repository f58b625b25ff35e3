//! Distributed policy-gradient router: one softmax table per node.

use rand::Rng;

use crate::gaps::{ActionSet, GapsParams, PolicyError, PolicyTable};
use crate::paths::unit_shortest_paths;
use crate::sim::{NetView, Packet, RewardDelivery, Route, Router, SimRng};
use crate::topology::Topology;

/// How node tables start out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapsInit {
    /// Parameters uniform on `[-scale, scale]`.
    Random { scale: f64 },
    /// Shortest-path next hop with probability `1 - epsilon`.
    EpsilonGreedy { epsilon: f64 },
}

#[derive(Debug, Clone)]
pub struct GapsRouter {
    tables: Vec<PolicyTable>,
    updates: u64,
}

impl GapsRouter {
    pub fn new<R: Rng + ?Sized>(
        topology: &Topology,
        params: GapsParams,
        init: GapsInit,
        rng: &mut R,
    ) -> Result<Self, PolicyError> {
        params.validate()?;
        let n = topology.node_count();
        let tables = match init {
            GapsInit::Random { scale } => (0..n)
                .map(|v| PolicyTable::init_random(n, topology.degree(v), rng, scale, params))
                .collect::<Result<Vec<_>, _>>()?,
            GapsInit::EpsilonGreedy { epsilon } => {
                let dt = unit_shortest_paths(topology);
                (0..n)
                    .map(|v| PolicyTable::init_epsilon_greedy(topology, &dt, v, epsilon, params))
                    .collect::<Result<Vec<_>, _>>()?
            }
        };
        Ok(GapsRouter { tables, updates: 0 })
    }

    /// Router with previously saved tables, one per node in node order.
    pub fn from_tables(topology: &Topology, tables: Vec<PolicyTable>) -> Result<Self, PolicyError> {
        let n = topology.node_count();
        if tables.len() != n {
            return Err(PolicyError::Format {
                line: 0,
                msg: format!("expected {n} tables, got {}", tables.len()),
            });
        }
        for (v, t) in tables.iter().enumerate() {
            if t.observations() != n || t.actions() != topology.degree(v) {
                return Err(PolicyError::Format {
                    line: 0,
                    msg: format!("table for node {v} has the wrong shape"),
                });
            }
            t.params().validate()?;
        }
        Ok(GapsRouter { tables, updates: 0 })
    }

    /// Concatenated text form of every node's table.
    pub fn to_text(&self) -> String {
        self.tables.iter().enumerate().map(|(v, t)| t.to_text(v)).collect()
    }

    /// Parses the output of [`GapsRouter::to_text`].
    pub fn from_text(topology: &Topology, text: &str, params: GapsParams) -> Result<Self, PolicyError> {
        let mut blocks: Vec<String> = Vec::new();
        for line in text.lines() {
            if line.starts_with("policy") {
                blocks.push(String::new());
            }
            match blocks.last_mut() {
                Some(b) => {
                    b.push_str(line);
                    b.push('\n');
                }
                None if line.trim().is_empty() => {}
                None => {
                    return Err(PolicyError::Format {
                        line: 1,
                        msg: "expected a `policy` header".into(),
                    })
                }
            }
        }
        let mut tables: Vec<Option<PolicyTable>> = vec![None; topology.node_count()];
        for block in blocks {
            let (node, table) = PolicyTable::from_text(&block, params)?;
            let slot = tables.get_mut(node).ok_or_else(|| PolicyError::Format {
                line: 0,
                msg: format!("node {node} out of range"),
            })?;
            *slot = Some(table);
        }
        let tables = tables
            .into_iter()
            .enumerate()
            .map(|(v, t)| {
                t.ok_or_else(|| PolicyError::Format {
                    line: 0,
                    msg: format!("no table for node {v}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_tables(topology, tables)
    }

    pub fn table(&self, node: usize) -> &PolicyTable {
        &self.tables[node]
    }

    pub fn tables(&self) -> &[PolicyTable] {
        &self.tables
    }

    /// Number of per-node parameter updates applied so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Current probability of each up link at `node` for `destination`,
    /// as (neighbor, probability) pairs.
    pub fn link_probabilities(&self, topology: &Topology, node: usize, destination: usize) -> Vec<(usize, f64)> {
        let available = ActionSet(topology.available_mask(node));
        let probs = self.tables[node]
            .action_probabilities(destination, available)
            .unwrap_or_default();
        available
            .iter()
            .map(|a| topology.links_of(node)[a])
            .zip(probs)
            .collect()
    }
}

impl Router for GapsRouter {
    fn route(&mut self, net: &NetView, node: usize, packet: &Packet, available: ActionSet, rng: &mut SimRng) -> Route {
        let link = self.tables[node]
            .sample_action(packet.destination, available, rng)
            .expect("available is nonempty");
        Route {
            neighbor: net.topology.links_of(node)[link],
            link,
        }
    }

    fn on_reward(&mut self, _net: &NetView, deliveries: Vec<RewardDelivery>) {
        for d in deliveries {
            let table = &mut self.tables[d.node];
            let acc = table.accumulate(&d.record).expect("recorded actions were available");
            table
                .apply_update(&acc, d.reward, d.elapsed)
                .expect("rewards are finite");
            self.updates += 1;
        }
    }

    fn wants_trajectories(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{SimConfig, Simulation};
    use crate::topology::build_grid_original;
    use rand::SeedableRng;

    #[test]
    fn epsilon_greedy_start_follows_shortest_paths() {
        let t = build_grid_original();
        let r = GapsRouter::new(
            &t,
            GapsParams::default(),
            GapsInit::EpsilonGreedy { epsilon: 0.01 },
            &mut SimRng::seed_from_u64(0),
        )
        .unwrap();
        let dt = unit_shortest_paths(&t);
        let probs = r.link_probabilities(&t, 0, 35);
        let hop = dt.next_hop(0, 35).unwrap();
        let p_hop = probs.iter().find(|(v, _)| *v == hop).unwrap().1;
        assert!((p_hop - 0.99).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_round_trip() {
        let t = build_grid_original();
        let params = GapsParams::default();
        let r = GapsRouter::new(
            &t,
            params,
            GapsInit::Random { scale: 2.0 },
            &mut SimRng::seed_from_u64(4),
        )
        .unwrap();
        let back = GapsRouter::from_text(&t, &r.to_text(), params).unwrap();
        assert_eq!(back.tables(), r.tables());
        let modified = crate::topology::build_grid_modified();
        assert!(GapsRouter::from_text(&modified, &r.to_text(), params).is_err());
        assert!(GapsRouter::from_text(&t, "garbage\n", params).is_err());
    }

    #[test]
    fn learning_changes_parameters() {
        let t = build_grid_original();
        let r = GapsRouter::new(
            &t,
            GapsParams::default(),
            GapsInit::EpsilonGreedy { epsilon: 0.01 },
            &mut SimRng::seed_from_u64(0),
        )
        .unwrap();
        let before = r.tables().to_vec();
        let mut sim = Simulation::new(t, r, SimConfig::default()).unwrap();
        sim.run(1.0, 500, 0).unwrap();
        assert!(sim.router().updates() > 0);
        assert_ne!(sim.router().tables(), &before[..]);
    }
}
