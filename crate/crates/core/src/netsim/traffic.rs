//! Legitimate sessions and spoofed flood demand.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::config::SimConfig;
use super::topology::Topology;
use super::{mix, SimFlow};
use crate::traffic::Protocol;

const SESSION_STREAM: u64 = 0x5E55_1045;
const STEP_STREAM: u64 = 0x57E9_C0DE;
const FLOOD_STREAM: u64 = 0xF100_D000;

/// Service mix for legitimate sessions.
const SERVICES: &[(Protocol, u16)] = &[
    (Protocol::Tcp, 80),
    (Protocol::Tcp, 443),
    (Protocol::Tcp, 21),
    (Protocol::Tcp, 22),
    (Protocol::Udp, 53),
    (Protocol::Icmp, 0),
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Session {
    pub flow: SimFlow,
    pub proto: Protocol,
    /// Mean packets per step.
    pub rate: f64,
}

/// Seeded legitimate demand: per-step Poisson packet counts for a fixed set
/// of sessions, precomputed for the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct LegitSchedule {
    sessions: Vec<Session>,
    /// Per step, `(session index, packets)` for sessions that send.
    steps: Vec<Vec<(u32, u32)>>,
}

/// Aggregate legitimate rate: the fraction of total edge capacity, divided
/// by the mean hop count since each packet occupies one edge per hop.
pub fn legit_rate(topo: &Topology, legit_volume: f64) -> f64 {
    let hops = topo.mean_hops().max(1.0);
    legit_volume * f64::from(topo.capacity) * topo.edges().len() as f64 / hops
}

impl LegitSchedule {
    pub fn new(topo: &Topology, cfg: &SimConfig) -> Self {
        let n = topo.node_count() as u32;
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, SESSION_STREAM));
        let mut drafts = Vec::with_capacity(n as usize * cfg.flows_per_node);
        for src in 0..n {
            for _ in 0..cfg.flows_per_node {
                let mut dst = rng.random_range(0..n - 1);
                if dst >= src {
                    dst += 1;
                }
                let &(proto, dport) = SERVICES.choose(&mut rng).expect("non-empty");
                let weight: f64 = rng.random_range(0.5..1.5);
                drafts.push((SimFlow { src, dst, dport }, proto, weight));
            }
        }
        let total_w: f64 = drafts.iter().map(|d| d.2).sum();
        let rate = legit_rate(topo, cfg.legit_volume);
        let sessions: Vec<Session> = drafts
            .into_iter()
            .map(|(flow, proto, w)| Session {
                flow,
                proto,
                rate: if total_w > 0.0 { rate * w / total_w } else { 0.0 },
            })
            .collect();
        let dists: Vec<Option<Poisson<f64>>> = sessions
            .iter()
            .map(|s| (s.rate > 0.0).then(|| Poisson::new(s.rate).expect("positive rate")))
            .collect();
        let steps = (0..cfg.steps as u64)
            .map(|step| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(cfg.seed, STEP_STREAM), step));
                dists
                    .iter()
                    .enumerate()
                    .filter_map(|(i, d)| {
                        let c = d.as_ref().map_or(0.0, |d| d.sample(&mut rng)) as u32;
                        (c > 0).then_some((i as u32, c))
                    })
                    .collect()
            })
            .collect();
        LegitSchedule { sessions, steps }
    }

    pub fn sessions(&self) -> &[Session] {
        &self.sessions
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Packets injected at `step`; empty past the horizon.
    pub fn at(&self, step: usize) -> impl Iterator<Item = (SimFlow, u64)> + '_ {
        self.steps
            .get(step)
            .into_iter()
            .flatten()
            .map(|&(i, c)| (self.sessions[i as usize].flow, u64::from(c)))
    }

    pub fn total_packets(&self) -> u64 {
        self.steps.iter().flatten().map(|&(_, c)| u64::from(c)).sum()
    }
}

/// Flood from one node toward a target, split across spoofed sources.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackPlan {
    pub source: u32,
    pub target: u32,
    pub power: f64,
    pub start: usize,
    pub steps: usize,
    pub flows: Vec<SimFlow>,
    /// Mean packets per step per spoofed flow.
    pub rate_per_flow: f64,
    seed: u64,
}

impl AttackPlan {
    /// Spoofed source ids are drawn from `n..` so they never collide with
    /// real nodes. The rate is `power` times the capacity of all edges
    /// leaving the source.
    pub fn new(topo: &Topology, cfg: &SimConfig, source: u32, target: u32, power: f64) -> Self {
        let n = topo.node_count() as u32;
        let seed = mix(mix(cfg.seed, FLOOD_STREAM), (u64::from(source) << 32) | u64::from(target));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ids: Vec<u32> = Vec::with_capacity(cfg.spoofed_sources);
        while ids.len() < cfg.spoofed_sources {
            let id = n + rng.random_range(0..1_000_000u32);
            if !ids.contains(&id) {
                ids.push(id);
            }
        }
        ids.sort_unstable();
        let flows: Vec<SimFlow> = ids
            .into_iter()
            .map(|src| SimFlow {
                src,
                dst: target,
                dport: cfg.attack_port,
            })
            .collect();
        let rate = power * f64::from(topo.capacity) * topo.degree(source) as f64;
        let rate_per_flow = if flows.is_empty() { 0.0 } else { rate / flows.len() as f64 };
        AttackPlan {
            source,
            target,
            power,
            start: cfg.attack_start,
            steps: cfg.attack_steps,
            flows,
            rate_per_flow,
            seed,
        }
    }

    pub fn end(&self) -> usize {
        self.start + self.steps
    }

    pub fn is_active(&self, step: usize) -> bool {
        self.rate_per_flow > 0.0 && (self.start..self.end()).contains(&step)
    }

    /// Flood packets injected at `step`.
    pub fn at(&self, step: usize) -> Vec<(SimFlow, u64)> {
        if !self.is_active(step) {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, step as u64));
        let d = Poisson::new(self.rate_per_flow).expect("positive rate");
        self.flows
            .iter()
            .filter_map(|f| {
                let c = d.sample(&mut rng) as u64;
                (c > 0).then_some((*f, c))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsim::topology::generate_topology;

    fn setup(volume: f64) -> (Topology, SimConfig) {
        let cfg = SimConfig {
            nodes: 12,
            legit_volume: volume,
            steps: 400,
            ..Default::default()
        };
        let topo = generate_topology(cfg.nodes, cfg.branching, cfg.cyclic, cfg.capacity, 4).unwrap();
        (topo, cfg)
    }

    #[test]
    fn mean_volume_matches_rate() {
        let (topo, cfg) = setup(0.3);
        let s = LegitSchedule::new(&topo, &cfg);
        let expected = legit_rate(&topo, 0.3) * cfg.steps as f64;
        let got = s.total_packets() as f64;
        assert!((got - expected).abs() < 0.05 * expected, "{got} vs {expected}");
        assert!(s.sessions().iter().all(|x| x.flow.src != x.flow.dst));
    }

    #[test]
    fn zero_volume_is_silent() {
        let (topo, cfg) = setup(0.0);
        assert_eq!(LegitSchedule::new(&topo, &cfg).total_packets(), 0);
    }

    #[test]
    fn flood_shape() {
        let (topo, cfg) = setup(0.3);
        let plan = AttackPlan::new(&topo, &cfg, 0, 5, 1.0);
        assert_eq!(plan.flows.len(), cfg.spoofed_sources);
        assert!(plan.flows.iter().all(|f| f.src >= 12 && f.dst == 5));
        let full = f64::from(cfg.capacity) * topo.degree(0) as f64;
        assert!((plan.rate_per_flow * plan.flows.len() as f64 - full).abs() < 1e-9);
        assert!(plan.at(cfg.attack_start - 1).is_empty());
        assert!(!plan.at(cfg.attack_start).is_empty());
        assert!(plan.at(plan.end()).is_empty());
        let none = AttackPlan::new(&topo, &cfg, 0, 5, 0.0);
        assert!(none.at(cfg.attack_start).is_empty());
    }
}
