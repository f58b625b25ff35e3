//! Deterministic comparison routers: static shortest path ("best"),
//! queue-aware shortest path recomputed periodically ("bestload"), and
//! Q-routing.

use thiserror::Error;

use crate::gaps::ActionSet;
use crate::paths::{shortest_paths, unit_shortest_paths, DistanceTable};
use crate::sim::{NetView, Packet, Route, Router, SimRng};
use crate::topology::Topology;

/// Deliveries between two bestload recomputations.
pub const BESTLOAD_PERIOD: u64 = 50;

/// Default Q-routing learning rate.
pub const DEFAULT_Q_LEARNING_RATE: f64 = 0.5;

/// Time charged for one link transmission.
const TRANSMISSION_COST: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum QRoutingError {
    #[error("no available neighbor")]
    NoNeighbor,
    #[error("non-finite input to Q update")]
    NonFinite,
    #[error("negative cost in Q update")]
    NegativeCost,
}

/// One next hop per (node, destination).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticRoutingTable {
    n: usize,
    next_hop: Vec<Option<u32>>,
}

impl StaticRoutingTable {
    pub fn from_distances(dt: &DistanceTable) -> Self {
        let n = dt.node_count();
        let next_hop = (0..n * n)
            .map(|i| dt.next_hop(i / n, i % n).map(|v| v as u32))
            .collect();
        StaticRoutingTable { n, next_hop }
    }

    pub fn next_hop(&self, node: usize, destination: usize) -> Option<usize> {
        self.next_hop[node * self.n + destination].map(|v| v as usize)
    }
}

/// Unit-cost shortest-path table.
pub fn best_policy(topology: &Topology) -> StaticRoutingTable {
    StaticRoutingTable::from_distances(&unit_shortest_paths(topology))
}

/// Shortest paths where entering node `v` costs `1 + queue_lengths[v]`.
pub fn bestload_recompute(topology: &Topology, queue_lengths: &[usize]) -> StaticRoutingTable {
    assert_eq!(queue_lengths.len(), topology.node_count());
    StaticRoutingTable::from_distances(&shortest_paths(topology, |_, v| 1 + queue_lengths[v] as u64))
}

fn static_route(table: &StaticRoutingTable, net: &NetView, node: usize, packet: &Packet) -> Route {
    let neighbor = table
        .next_hop(node, packet.destination)
        .expect("injected packets always have a route to their destination");
    Route {
        neighbor,
        link: net.topology.link_index(node, neighbor).expect("next hop is a neighbor"),
    }
}

/// Static unit-cost shortest-path routing.
#[derive(Debug, Clone)]
pub struct BestRouter {
    table: StaticRoutingTable,
}

impl BestRouter {
    pub fn new(topology: &Topology) -> Self {
        BestRouter {
            table: best_policy(topology),
        }
    }

    pub fn table(&self) -> &StaticRoutingTable {
        &self.table
    }
}

impl Router for BestRouter {
    fn route(&mut self, net: &NetView, node: usize, packet: &Packet, _: ActionSet, _: &mut SimRng) -> Route {
        static_route(&self.table, net, node, packet)
    }

    fn on_topology_change(&mut self, topology: &Topology) {
        self.table = best_policy(topology);
    }
}

/// Shortest-path routing weighted by global queue lengths, refreshed
/// every [`BESTLOAD_PERIOD`] deliveries.
#[derive(Debug, Clone)]
pub struct BestloadRouter {
    table: StaticRoutingTable,
    since_refresh: u64,
    recomputations: u64,
}

impl BestloadRouter {
    pub fn new(topology: &Topology) -> Self {
        BestloadRouter {
            table: best_policy(topology),
            since_refresh: 0,
            recomputations: 0,
        }
    }

    pub fn table(&self) -> &StaticRoutingTable {
        &self.table
    }

    pub fn recomputations(&self) -> u64 {
        self.recomputations
    }
}

impl Router for BestloadRouter {
    fn route(&mut self, net: &NetView, node: usize, packet: &Packet, _: ActionSet, _: &mut SimRng) -> Route {
        static_route(&self.table, net, node, packet)
    }

    fn on_delivered(&mut self, net: &NetView, _: &Packet) {
        self.since_refresh += 1;
        if self.since_refresh == BESTLOAD_PERIOD {
            self.table = bestload_recompute(net.topology, net.queue_lengths);
            self.since_refresh = 0;
            self.recomputations += 1;
        }
    }

    fn on_topology_change(&mut self, topology: &Topology) {
        self.table = best_policy(topology);
    }
}

/// Estimated remaining delivery time `q[node][destination][link]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n: usize,
    // offsets[node] = start of node's block of n * degree entries
    offsets: Vec<usize>,
    degrees: Vec<usize>,
    q: Vec<f64>,
    pub learning_rate: f64,
}

impl QTable {
    /// Optimistic all-zero estimates.
    pub fn new(topology: &Topology, learning_rate: f64) -> Self {
        let n = topology.node_count();
        let degrees: Vec<usize> = (0..n).map(|v| topology.degree(v)).collect();
        let mut offsets = Vec::with_capacity(n);
        let mut total = 0;
        for d in &degrees {
            offsets.push(total);
            total += n * d;
        }
        QTable {
            n,
            offsets,
            degrees,
            q: vec![0.0; total],
            learning_rate,
        }
    }

    fn index(&self, node: usize, destination: usize, link: usize) -> usize {
        debug_assert!(link < self.degrees[node]);
        self.offsets[node] + destination * self.degrees[node] + link
    }

    pub fn get(&self, node: usize, destination: usize, link: usize) -> f64 {
        self.q[self.index(node, destination, link)]
    }

    pub fn set(&mut self, node: usize, destination: usize, link: usize, value: f64) {
        let i = self.index(node, destination, link);
        self.q[i] = value;
    }

    /// Smallest estimate over `available` links; zero at the destination.
    pub fn best_remaining(&self, node: usize, destination: usize, available: ActionSet) -> f64 {
        if node == destination {
            return 0.0;
        }
        available
            .iter()
            .map(|a| self.get(node, destination, a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }
}

/// Greedy link choice: lowest estimate, ties to the lowest link index
/// (which is also the lowest neighbor index).
pub fn qrouting_select(
    q: &QTable,
    node: usize,
    destination: usize,
    available: ActionSet,
) -> Result<usize, QRoutingError> {
    let mut best: Option<(usize, f64)> = None;
    for a in available.iter() {
        let v = q.get(node, destination, a);
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a).ok_or(QRoutingError::NoNeighbor)
}

/// `q += alpha * (queue_time + transmission + best_remaining - q)` for
/// the entry `(node, destination, link)`.
pub fn qrouting_update(
    q: &mut QTable,
    node: usize,
    destination: usize,
    link: usize,
    queue_time_at_neighbor: f64,
    transmission_cost: f64,
    best_remaining_from_neighbor: f64,
) -> Result<(), QRoutingError> {
    let inputs = [queue_time_at_neighbor, transmission_cost, best_remaining_from_neighbor];
    if inputs.iter().any(|v| !v.is_finite()) {
        return Err(QRoutingError::NonFinite);
    }
    if inputs.iter().any(|&v| v < 0.0) {
        return Err(QRoutingError::NegativeCost);
    }
    let old = q.get(node, destination, link);
    let target = queue_time_at_neighbor + transmission_cost + best_remaining_from_neighbor;
    q.set(node, destination, link, old + q.learning_rate * (target - old));
    Ok(())
}

/// Q-routing: every node forwards to the neighbor with the lowest
/// estimated remaining time and refines that estimate from the
/// neighbor's own best estimate as the packet leaves.
#[derive(Debug, Clone)]
pub struct QRouter {
    q: QTable,
    available: Vec<ActionSet>,
}

impl QRouter {
    pub fn new(topology: &Topology, learning_rate: f64) -> Self {
        QRouter {
            q: QTable::new(topology, learning_rate),
            available: Self::masks(topology),
        }
    }

    fn masks(topology: &Topology) -> Vec<ActionSet> {
        (0..topology.node_count())
            .map(|v| ActionSet(topology.available_mask(v)))
            .collect()
    }

    pub fn table(&self) -> &QTable {
        &self.q
    }
}

impl Router for QRouter {
    fn route(&mut self, net: &NetView, node: usize, packet: &Packet, available: ActionSet, _: &mut SimRng) -> Route {
        let link = qrouting_select(&self.q, node, packet.destination, available).expect("available is nonempty");
        Route {
            neighbor: net.topology.links_of(node)[link],
            link,
        }
    }

    fn on_forward(&mut self, net: &NetView, node: usize, route: Route, packet: &Packet) {
        let y = route.neighbor;
        let d = packet.destination;
        // waiting behind y's current queue, then y's own service step
        let queue_time = net.queue_lengths[y] as f64 + 1.0;
        let remaining = self.q.best_remaining(y, d, self.available[y]);
        let remaining = if remaining.is_finite() { remaining } else { 0.0 };
        qrouting_update(
            &mut self.q,
            node,
            d,
            route.link,
            queue_time,
            TRANSMISSION_COST,
            remaining,
        )
        .expect("costs are finite and nonnegative");
    }

    fn on_topology_change(&mut self, topology: &Topology) {
        self.available = Self::masks(topology);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::build_grid_original;

    fn line3() -> Topology {
        Topology::parse("nodes 3\nedge 0 1\nedge 1 2").unwrap()
    }

    #[test]
    fn best_on_line() {
        let t = best_policy(&line3());
        assert_eq!(t.next_hop(0, 2), Some(1));
        assert_eq!(t.next_hop(2, 2), None);
    }

    #[test]
    fn unreachable_destination_has_no_entry() {
        let t = best_policy(&Topology::parse("nodes 3\nedge 0 1").unwrap());
        assert_eq!(t.next_hop(0, 2), None);
    }

    #[test]
    fn bestload_with_empty_queues_equals_best() {
        let t = build_grid_original();
        assert_eq!(bestload_recompute(&t, &[0; 36]), best_policy(&t));
    }

    #[test]
    fn bestload_avoids_loaded_node() {
        // square: 0-1-3 and 0-2-3 tie; load node 1
        let t = Topology::parse("nodes 4\nedge 0 1\nedge 1 3\nedge 0 2\nedge 2 3").unwrap();
        assert_eq!(best_policy(&t).next_hop(0, 3), Some(1));
        assert_eq!(bestload_recompute(&t, &[0, 10, 0, 0]).next_hop(0, 3), Some(2));
    }

    #[test]
    fn select_argmin_with_low_index_ties() {
        let t = Topology::parse("nodes 4\nedge 0 1\nedge 0 2\nedge 0 3").unwrap();
        let mut q = QTable::new(&t, 0.5);
        assert_eq!(qrouting_select(&q, 0, 3, ActionSet::from_indices(&[1])), Ok(1));
        q.set(0, 3, 0, 5.0);
        q.set(0, 3, 1, 3.0);
        q.set(0, 3, 2, 9.0);
        assert_eq!(qrouting_select(&q, 0, 3, ActionSet::all(3)), Ok(1));
        q.set(0, 3, 0, 3.0);
        assert_eq!(qrouting_select(&q, 0, 3, ActionSet::all(3)), Ok(0));
        assert_eq!(qrouting_select(&q, 0, 3, ActionSet(0)), Err(QRoutingError::NoNeighbor));
    }

    #[test]
    fn update_rule() {
        let t = line3();
        let mut q = QTable::new(&t, 1.0);
        q.set(0, 2, 0, 3.0);
        qrouting_update(&mut q, 0, 2, 0, 2.0, 1.0, 4.0).unwrap();
        assert_eq!(q.get(0, 2, 0), 7.0);
        // fixed point
        q.learning_rate = 0.5;
        qrouting_update(&mut q, 0, 2, 0, 2.0, 1.0, 4.0).unwrap();
        assert_eq!(q.get(0, 2, 0), 7.0);
        assert_eq!(
            qrouting_update(&mut q, 0, 2, 0, f64::NAN, 1.0, 0.0),
            Err(QRoutingError::NonFinite)
        );
        assert_eq!(
            qrouting_update(&mut q, 0, 2, 0, -1.0, 1.0, 0.0),
            Err(QRoutingError::NegativeCost)
        );
    }

    #[test]
    fn best_remaining_is_zero_at_destination() {
        let t = line3();
        let mut q = QTable::new(&t, 0.5);
        q.set(1, 1, 0, 8.0);
        assert_eq!(q.best_remaining(1, 1, ActionSet::all(2)), 0.0);
        q.set(1, 2, 0, 8.0);
        q.set(1, 2, 1, 2.0);
        assert_eq!(q.best_remaining(1, 2, ActionSet::all(2)), 2.0);
    }
}
