//! All-pairs shortest paths over up links with first-hop tables.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::topology::Topology;

/// Integer routing cost. Integer arithmetic keeps path sums exact.
pub type Cost = u64;

const UNREACHABLE: Cost = Cost::MAX;

/// All-pairs distances plus a deterministic first-hop table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    n: usize,
    dist: Vec<Cost>,
    next_hop: Vec<Option<u32>>,
}

impl DistanceTable {
    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Shortest-path cost from `from` to `to`, `None` when unreachable.
    pub fn dist(&self, from: usize, to: usize) -> Option<Cost> {
        match self.dist[from * self.n + to] {
            UNREACHABLE => None,
            d => Some(d),
        }
    }

    /// First neighbor on a shortest path from `from` toward `to`. `None`
    /// when `from == to` or `to` is unreachable.
    pub fn next_hop(&self, from: usize, to: usize) -> Option<usize> {
        self.next_hop[from * self.n + to].map(|v| v as usize)
    }

    /// Node sequence obtained by following next hops, endpoints included.
    pub fn path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        self.dist(from, to)?;
        let mut path = vec![from];
        let mut at = from;
        while at != to {
            at = self.next_hop(at, to)?;
            path.push(at);
            if path.len() > self.n {
                return None;
            }
        }
        Some(path)
    }
}

/// Exact shortest paths with `weight(u, v)` the positive cost of moving
/// from `u` to `v` over the up link between them. Weights may be
/// asymmetric. Among equal-cost first steps the lowest neighbor index wins.
pub fn shortest_paths<W>(topology: &Topology, weight: W) -> DistanceTable
where
    W: Fn(usize, usize) -> Cost,
{
    let n = topology.node_count();
    let mut dist = vec![UNREACHABLE; n * n];
    let mut next_hop = vec![None; n * n];
    let mut to_dest = vec![UNREACHABLE; n];
    let mut heap = BinaryHeap::new();

    for dest in 0..n {
        // Dijkstra toward `dest`, relaxing arcs backwards.
        to_dest.fill(UNREACHABLE);
        to_dest[dest] = 0;
        heap.push(Reverse((0, dest)));
        while let Some(Reverse((d, v))) = heap.pop() {
            if d > to_dest[v] {
                continue;
            }
            for u in topology.neighbors(v) {
                let w = weight(u, v);
                debug_assert!(w > 0, "link costs must be positive");
                let cand = d.saturating_add(w);
                if cand < to_dest[u] {
                    to_dest[u] = cand;
                    heap.push(Reverse((cand, u)));
                }
            }
        }
        for u in 0..n {
            dist[u * n + dest] = to_dest[u];
            if u == dest || to_dest[u] == UNREACHABLE {
                continue;
            }
            // neighbors() is ascending, so the first match is the lowest index
            next_hop[u * n + dest] = topology
                .neighbors(u)
                .find(|&v| to_dest[v] != UNREACHABLE && weight(u, v) + to_dest[v] == to_dest[u])
                .map(|v| v as u32);
        }
    }
    DistanceTable { n, dist, next_hop }
}

/// Shortest paths counting every link as one unit.
pub fn unit_shortest_paths(topology: &Topology) -> DistanceTable {
    shortest_paths(topology, |_, _| 1)
}
