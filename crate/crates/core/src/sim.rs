//! Discrete-time network simulation.
//!
//! # Timing
//!
//! One call to [`Simulation::step`] is one time unit. Within a step every
//! node with a nonempty queue services its head packet (one unit of queue
//! delay). A packet serviced at its destination is delivered at the end of
//! that step. Any other serviced packet is handed to the node's router and
//! spends the whole next step on the link (one unit of transmission), then
//! joins the tail of the neighbor's queue. All nodes act on the queue
//! contents they had at the start of the step, so results do not depend on
//! node iteration order.
//!
//! A packet injected at time `t0` with an uncongested path of `h` links is
//! therefore delivered at `t0 + 2h + 1`: it is charged for queue service at
//! the origin, at every intermediate node and at the destination, plus one
//! unit per link.
//!
//! # Rewards
//!
//! A delivered packet earns `-(elapsed time)`. A packet whose hop count
//! exceeds the node count is discarded and earns `-2 * (node_count + 1)`,
//! as does a packet that finds its next queue full. Each arrival at a node
//! already in the packet's recent-node trace costs a further `-1`.
//! Acknowledgments carrying the reward back to the nodes that forwarded
//! the packet are instantaneous and consume no network resources.

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::gaps::{ActionSet, TrajectoryEntry, TrajectoryRecord};
use crate::topology::{LinkState, Topology, TopologyError};

/// The simulation's single random stream.
pub type SimRng = ChaCha8Rng;

/// Number of recently visited nodes a packet remembers.
pub const TRACE_CAPACITY: usize = 8;

/// Default per-node queue capacity.
pub const DEFAULT_QUEUE_CAPACITY: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("load must be positive and finite, got {0}")]
    InvalidLoad(f64),
    #[error("queue capacity must be at least 1")]
    InvalidQueueCapacity,
    #[error("node {0} forwarded packet {1} but left no trajectory record")]
    MissingRecord(usize, u64),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Fixed-size ring of recently visited nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    nodes: [u32; TRACE_CAPACITY],
    len: u8,
    head: u8,
}

impl Default for Trace {
    fn default() -> Self {
        Trace {
            nodes: [0; TRACE_CAPACITY],
            len: 0,
            head: 0,
        }
    }
}

impl Trace {
    pub fn contains(&self, node: usize) -> bool {
        self.iter().any(|n| n == node)
    }

    pub fn push(&mut self, node: usize) {
        let slot = (self.head as usize + self.len as usize) % TRACE_CAPACITY;
        self.nodes[slot] = node as u32;
        if (self.len as usize) < TRACE_CAPACITY {
            self.len += 1;
        } else {
            self.head = ((self.head as usize + 1) % TRACE_CAPACITY) as u8;
        }
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len as usize).map(move |i| self.nodes[(self.head as usize + i) % TRACE_CAPACITY] as usize)
    }
}

/// A routing decision logged against a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub node: usize,
    pub entry: TrajectoryEntry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub origin: usize,
    pub destination: usize,
    pub created_at: u64,
    pub last_service_at: u64,
    /// Link transmissions performed so far.
    pub hops: u32,
    pub trace: Trace,
    /// Arrivals at a node already present in the trace.
    pub revisits: u32,
    /// Populated only when the router asks for trajectories.
    pub decisions: Vec<Decision>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Delivered,
    /// Exceeded the hop limit, or had no usable link.
    Discarded,
    /// Arrived at a full queue.
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardEvent {
    pub packet_id: u64,
    pub terminal: Terminal,
    pub reward: f64,
    /// Time from creation to termination.
    pub elapsed: u64,
}

/// Reward plus one node's own decisions for the packet.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardDelivery {
    pub node: usize,
    pub reward: f64,
    pub elapsed: u64,
    pub record: TrajectoryRecord,
}

/// Outcome of a completed delivery, kept when delivery logging is on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeliveryRecord {
    pub packet_id: u64,
    pub origin: usize,
    pub destination: usize,
    pub hops: u32,
    pub elapsed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Metrics {
    pub injected: u64,
    pub delivered: u64,
    /// Hop-limit discards plus packets injected toward unreachable destinations.
    pub discarded: u64,
    /// Packets lost to full queues, at injection or on arrival.
    pub dropped: u64,
    /// Sum of (delivery completion time - creation time) over delivered packets.
    pub total_delivery_time: u64,
    pub total_hops: u64,
}

impl Metrics {
    pub fn average_delivery_time(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.total_delivery_time as f64 / self.delivered as f64)
    }

    pub fn average_hops(&self) -> Option<f64> {
        (self.delivered > 0).then(|| self.total_hops as f64 / self.delivered as f64)
    }
}

/// What a router may observe when deciding.
pub struct NetView<'a> {
    pub topology: &'a Topology,
    /// Queue lengths at the start of the current step.
    pub queue_lengths: &'a [usize],
    pub clock: u64,
}

/// Link chosen for a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub neighbor: usize,
    /// Position of the link in `topology.links_of(node)`.
    pub link: usize,
}

/// Per-network routing logic. One router instance serves every node of a
/// simulation and keeps whatever per-node state its algorithm needs.
pub trait Router {
    /// Chooses an up link for `packet`, which is at `node` and not yet at
    /// its destination. `available` is never empty.
    fn route(&mut self, net: &NetView, node: usize, packet: &Packet, available: ActionSet, rng: &mut SimRng) -> Route;

    /// Called after the packet's hop count has been incremented.
    fn on_forward(&mut self, _net: &NetView, _node: usize, _route: Route, _packet: &Packet) {}

    fn on_delivered(&mut self, _net: &NetView, _packet: &Packet) {}

    /// Rewards for a terminated packet, one per forwarding node. Only
    /// called when [`Router::wants_trajectories`] is true.
    fn on_reward(&mut self, _net: &NetView, _deliveries: Vec<RewardDelivery>) {}

    fn on_topology_change(&mut self, _topology: &Topology) {}

    fn wants_trajectories(&self) -> bool {
        false
    }
}

impl<R: Router + ?Sized> Router for Box<R> {
    fn route(&mut self, net: &NetView, node: usize, packet: &Packet, available: ActionSet, rng: &mut SimRng) -> Route {
        (**self).route(net, node, packet, available, rng)
    }
    fn on_forward(&mut self, net: &NetView, node: usize, route: Route, packet: &Packet) {
        (**self).on_forward(net, node, route, packet)
    }
    fn on_delivered(&mut self, net: &NetView, packet: &Packet) {
        (**self).on_delivered(net, packet)
    }
    fn on_reward(&mut self, net: &NetView, deliveries: Vec<RewardDelivery>) {
        (**self).on_reward(net, deliveries)
    }
    fn on_topology_change(&mut self, topology: &Topology) {
        (**self).on_topology_change(topology)
    }
    fn wants_trajectories(&self) -> bool {
        (**self).wants_trajectories()
    }
}

/// Groups a terminated packet's decisions by forwarding node and pairs
/// each group with the packet's reward. `handlers` lists the nodes that
/// forwarded the packet; each must have a record.
pub fn distribute_reward(
    event: &RewardEvent,
    handlers: &[usize],
    records: &BTreeMap<usize, TrajectoryRecord>,
) -> Result<Vec<RewardDelivery>, SimError> {
    let mut nodes = handlers.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    nodes
        .into_iter()
        .map(|node| {
            let record = records
                .get(&node)
                .filter(|r| r.packet_id == event.packet_id)
                .ok_or(SimError::MissingRecord(node, event.packet_id))?;
            Ok(RewardDelivery {
                node,
                reward: event.reward,
                elapsed: event.elapsed,
                record: record.clone(),
            })
        })
        .collect()
}

/// Splits a packet's decision log into per-node trajectory records.
pub fn records_by_node(packet_id: u64, decisions: &[Decision]) -> BTreeMap<usize, TrajectoryRecord> {
    let mut out: BTreeMap<usize, TrajectoryRecord> = BTreeMap::new();
    for d in decisions {
        out.entry(d.node)
            .or_insert_with(|| TrajectoryRecord::new(packet_id))
            .push(d.entry);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub queue_capacity: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            seed: 1,
        }
    }
}

pub struct Simulation<R> {
    topology: Topology,
    router: R,
    queues: Vec<VecDeque<Packet>>,
    in_flight: Vec<(usize, Packet)>,
    available: Vec<ActionSet>,
    reachable: Vec<bool>,
    queue_capacity: usize,
    clock: u64,
    next_id: u64,
    rng: SimRng,
    totals: Metrics,
    window: Metrics,
    measuring: bool,
    delivery_log: Option<Vec<DeliveryRecord>>,
    queue_snapshot: Vec<usize>,
}

impl<R: Router> Simulation<R> {
    pub fn new(topology: Topology, router: R, config: SimConfig) -> Result<Self, SimError> {
        if config.queue_capacity == 0 {
            return Err(SimError::InvalidQueueCapacity);
        }
        let n = topology.node_count();
        let mut sim = Simulation {
            queues: vec![VecDeque::new(); n],
            in_flight: Vec::new(),
            available: Vec::new(),
            reachable: Vec::new(),
            queue_capacity: config.queue_capacity,
            clock: 0,
            next_id: 0,
            rng: SimRng::seed_from_u64(config.seed),
            totals: Metrics::default(),
            window: Metrics::default(),
            measuring: true,
            delivery_log: None,
            queue_snapshot: vec![0; n],
            router,
            topology,
        };
        sim.refresh_links();
        Ok(sim)
    }

    fn refresh_links(&mut self) {
        let n = self.topology.node_count();
        self.available = (0..n).map(|v| ActionSet(self.topology.available_mask(v))).collect();
        self.reachable = (0..n).flat_map(|v| self.topology.reachable_from(v)).collect();
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn router(&self) -> &R {
        &self.router
    }

    pub fn router_mut(&mut self) -> &mut R {
        &mut self.router
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Lifetime counters.
    pub fn totals(&self) -> &Metrics {
        &self.totals
    }

    /// Counters for the current measurement window.
    pub fn window(&self) -> &Metrics {
        &self.window
    }

    pub fn queue_len(&self, node: usize) -> usize {
        self.queues[node].len()
    }

    pub fn queue(&self, node: usize) -> impl Iterator<Item = &Packet> {
        self.queues[node].iter()
    }

    pub fn queued(&self) -> usize {
        self.queues.iter().map(VecDeque::len).sum()
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    /// `injected = delivered + discarded + dropped + queued + in flight`.
    pub fn conservation_holds(&self) -> bool {
        let t = &self.totals;
        t.injected == t.delivered + t.discarded + t.dropped + self.queued() as u64 + self.in_flight() as u64
    }

    /// Starts recording every delivery (measured or not).
    pub fn enable_delivery_log(&mut self) {
        self.delivery_log.get_or_insert_with(Vec::new);
    }

    pub fn delivery_log(&self) -> &[DeliveryRecord] {
        self.delivery_log.as_deref().unwrap_or_default()
    }

    /// Resets the measurement window and sets whether deliveries count.
    pub fn begin_window(&mut self, measuring: bool) {
        self.window = Metrics::default();
        self.measuring = measuring;
    }

    pub fn set_link_state(&mut self, u: usize, v: usize, state: LinkState) -> Result<(), SimError> {
        self.topology = self.topology.set_link_state(u, v, state)?;
        self.refresh_links();
        self.router.on_topology_change(&self.topology);
        Ok(())
    }

    /// Places a packet at `origin`'s queue tail as if injected now.
    /// Returns the packet id, or `None` if it was dropped or discarded.
    pub fn inject_one(&mut self, origin: usize, destination: usize) -> Option<u64> {
        assert_ne!(origin, destination, "packets never target their origin");
        let n = self.topology.node_count();
        let id = self.next_id;
        self.next_id += 1;
        self.totals.injected += 1;
        self.window.injected += 1;
        if !self.reachable[origin * n + destination] {
            self.totals.discarded += 1;
            self.window.discarded += 1;
            return None;
        }
        if self.queues[origin].len() >= self.queue_capacity {
            self.totals.dropped += 1;
            self.window.dropped += 1;
            return None;
        }
        let mut trace = Trace::default();
        trace.push(origin);
        self.queues[origin].push_back(Packet {
            id,
            origin,
            destination,
            created_at: self.clock,
            last_service_at: self.clock,
            hops: 0,
            trace,
            revisits: 0,
            decisions: Vec::new(),
        });
        Some(id)
    }

    /// Draws `k ~ Poisson(load)` new packets with uniformly random origin
    /// and a uniformly random destination different from the origin.
    /// Returns `k`.
    pub fn inject_packets(&mut self, load: f64) -> Result<u64, SimError> {
        if !(load > 0.0 && load.is_finite()) {
            return Err(SimError::InvalidLoad(load));
        }
        let n = self.topology.node_count();
        if n < 2 {
            return Ok(0);
        }
        let k = Poisson::new(load)
            .map_err(|_| SimError::InvalidLoad(load))?
            .sample(&mut self.rng) as u64;
        for _ in 0..k {
            let origin = self.rng.random_range(0..n);
            let mut destination = self.rng.random_range(0..n - 1);
            if destination >= origin {
                destination += 1;
            }
            self.inject_one(origin, destination);
        }
        Ok(k)
    }

    /// Advances one time unit. Returns the reward events of packets that
    /// terminated during the step, in node order.
    pub fn step(&mut self) -> Vec<RewardEvent> {
        let n = self.topology.node_count();
        for (len, q) in self.queue_snapshot.iter_mut().zip(&self.queues) {
            *len = q.len();
        }
        let mut events = Vec::new();
        let mut outgoing = Vec::new();
        let record = self.router.wants_trajectories();

        for node in 0..n {
            let Some(mut packet) = self.queues[node].pop_front() else {
                continue;
            };
            packet.last_service_at = self.clock;
            if packet.destination == node {
                let elapsed = self.clock + 1 - packet.created_at;
                self.totals.delivered += 1;
                self.totals.total_delivery_time += elapsed;
                self.totals.total_hops += packet.hops as u64;
                if self.measuring {
                    self.window.delivered += 1;
                    self.window.total_delivery_time += elapsed;
                    self.window.total_hops += packet.hops as u64;
                }
                if let Some(log) = self.delivery_log.as_mut() {
                    log.push(DeliveryRecord {
                        packet_id: packet.id,
                        origin: packet.origin,
                        destination: packet.destination,
                        hops: packet.hops,
                        elapsed,
                    });
                }
                let view = NetView {
                    topology: &self.topology,
                    queue_lengths: &self.queue_snapshot,
                    clock: self.clock,
                };
                self.router.on_delivered(&view, &packet);
                let reward = -(elapsed as f64) - packet.revisits as f64;
                events.push(self.terminate(packet, Terminal::Delivered, reward, elapsed));
                continue;
            }
            let available = self.available[node];
            if available.is_empty() {
                events.push(self.discard(packet, Terminal::Discarded));
                continue;
            }
            let view = NetView {
                topology: &self.topology,
                queue_lengths: &self.queue_snapshot,
                clock: self.clock,
            };
            let route = self.router.route(&view, node, &packet, available, &mut self.rng);
            assert!(
                available.contains(route.link) && self.topology.links_of(node).get(route.link) == Some(&route.neighbor),
                "router chose link {:?} at node {node}, which is not an up link",
                route
            );
            if record {
                packet.decisions.push(Decision {
                    node,
                    entry: TrajectoryEntry {
                        tau: packet.hops,
                        observation: packet.destination,
                        action: route.link,
                        available,
                    },
                });
            }
            packet.hops += 1;
            self.router.on_forward(&view, node, route, &packet);
            if packet.hops as usize > n {
                events.push(self.discard(packet, Terminal::Discarded));
                continue;
            }
            outgoing.push((route.neighbor, packet));
        }

        let arriving = std::mem::replace(&mut self.in_flight, outgoing);
        for (to, mut packet) in arriving {
            if self.queues[to].len() >= self.queue_capacity {
                events.push(self.discard(packet, Terminal::Dropped));
                continue;
            }
            if packet.trace.contains(to) {
                packet.revisits += 1;
            }
            packet.trace.push(to);
            self.queues[to].push_back(packet);
        }

        self.clock += 1;
        events
    }

    /// Penalty for a packet that never reaches its destination.
    pub fn failure_penalty(&self) -> f64 {
        -2.0 * (self.topology.node_count() as f64 + 1.0)
    }

    fn discard(&mut self, packet: Packet, terminal: Terminal) -> RewardEvent {
        match terminal {
            Terminal::Dropped => {
                self.totals.dropped += 1;
                self.window.dropped += 1;
            }
            _ => {
                self.totals.discarded += 1;
                self.window.discarded += 1;
            }
        }
        let elapsed = self.clock + 1 - packet.created_at;
        let reward = self.failure_penalty() - packet.revisits as f64;
        self.terminate(packet, terminal, reward, elapsed)
    }

    fn terminate(&mut self, packet: Packet, terminal: Terminal, reward: f64, elapsed: u64) -> RewardEvent {
        let event = RewardEvent {
            packet_id: packet.id,
            terminal,
            reward,
            elapsed,
        };
        if self.router.wants_trajectories() && !packet.decisions.is_empty() {
            let records = records_by_node(packet.id, &packet.decisions);
            let handlers: Vec<usize> = packet.decisions.iter().map(|d| d.node).collect();
            let deliveries =
                distribute_reward(&event, &handlers, &records).expect("records cover every forwarding node");
            let view = NetView {
                topology: &self.topology,
                queue_lengths: &self.queue_snapshot,
                clock: self.clock,
            };
            self.router.on_reward(&view, deliveries);
        }
        event
    }

    /// Runs `steps` steps injecting `Poisson(load)` packets before each.
    /// Only deliveries completing in steps `measure_after..steps` are
    /// counted in the returned metrics.
    pub fn run(&mut self, load: f64, steps: u64, measure_after: u64) -> Result<Metrics, SimError> {
        self.begin_window(measure_after == 0);
        for i in 0..steps {
            if i == measure_after {
                self.begin_window(true);
            }
            self.inject_packets(load)?;
            self.step();
        }
        Ok(self.window)
    }
}
