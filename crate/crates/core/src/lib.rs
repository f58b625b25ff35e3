//! Packet routing on small networks with per-node learning routers.
//!
//! The crate provides a discrete-time network simulator ([`sim`]), a
//! distributed policy-gradient router in which every node learns its own
//! softmax forwarding table ([`gaps`], [`agent`]), the deterministic
//! baselines it is compared against ([`baselines`]), and a harness for
//! load sweeps over seeds ([`harness`]).

pub mod agent;
pub mod baselines;
pub mod gaps;
pub mod harness;
pub mod paths;
pub mod sim;
pub mod topology;

pub use agent::{GapsInit, GapsRouter};
pub use baselines::{BestRouter, BestloadRouter, QRouter, QTable, StaticRoutingTable};
pub use gaps::{
    ActionSet, GapsParams, GradientAccumulator, PolicyError, PolicyTable, TrajectoryEntry, TrajectoryRecord,
};
pub use harness::{Algorithm, ExperimentConfig, HarnessError, InitMode, ResultRow, SummaryRow, TopologySource};
pub use paths::{shortest_paths, unit_shortest_paths, Cost, DistanceTable};
pub use sim::{Metrics, Packet, RewardEvent, Router, SimConfig, SimError, Simulation, Terminal};
pub use topology::{build_grid_modified, build_grid_original, Edge, LinkState, Topology, TopologyError};
