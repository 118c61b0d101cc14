//! Discrete-step network simulator for the immune-agent defense.
//!
//! A run builds a random topology, colors it to place sensors, injects
//! seeded legitimate sessions plus an optional spoofed flood, and forwards
//! packet bundles one hop per step along shortest paths that avoid nodes
//! blocking the flow. Sensors observe every bundle present at their node.

mod config;
mod metrics;
mod placement;
mod routing;
mod sweep;
mod topology;
mod traffic;
mod world;

use std::fmt;

pub use config::{ResponseMode, SimConfig};
pub use metrics::{location_bin, Counts, MetricsReport, LOCATION_BINS};
pub use placement::{place_agents, Placement, SensorRole};
pub use routing::{Hop, Router};
pub use sweep::{
    feasible_pairs, run_pairs, sweep, Mean, ModeStats, PairOutcome, PairSelection, SweepAxis,
    SweepRow, SweepSpec, SweepTable,
};
pub use topology::{generate_topology, node_name, Topology};
pub use traffic::{legit_rate, AttackPlan, LegitSchedule, Session};
pub use world::{run, SimEvent, SimWorld, EVENT_HEADER};

use crate::traffic::Flow;

/// Compact flow key used inside the simulator. Sources at or above the node
/// count are spoofed attack identities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimFlow {
    pub src: u32,
    pub dst: u32,
    pub dport: u16,
}

impl Flow for SimFlow {
    type Node = u32;

    fn destination(&self) -> &u32 {
        &self.dst
    }

    fn port(&self) -> u16 {
        self.dport
    }
}

impl fmt::Display for SimFlow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}:{}", self.src, self.dst, self.dport)
    }
}

/// SplitMix64 finalizer; derives independent stream seeds from one seed.
pub(crate) fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the flow fields and a node id; stable across platforms.
pub(crate) fn flow_hash(flow: &SimFlow, node: u32) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = flow
        .src
        .to_le_bytes()
        .into_iter()
        .chain(flow.dst.to_le_bytes())
        .chain(flow.dport.to_le_bytes())
        .chain(node.to_le_bytes());
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
