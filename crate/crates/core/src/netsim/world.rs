//! Simulation state and the step loop.
//!
//! Per step: pending signals are delivered, scheduled packets are injected,
//! every bundle present at a sensor node enters that sensor's observation
//! window, bundles are forwarded one hop (or dropped, or delivered), and the
//! block-table changes produced by this step's windows are installed for the
//! next one. Signals emitted in a step are delivered at the start of the next.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use super::config::{ResponseMode, SimConfig};
use super::metrics::{location_bin, Counts, MetricsReport, LOCATION_BINS};
use super::placement::{place_agents, Placement, SensorRole};
use super::routing::{Hop, Router};
use super::topology::{generate_topology, node_name, Topology};
use super::traffic::{AttackPlan, LegitSchedule};
use super::{mix, SimFlow};
use crate::agents::{ActivationSignal, Agent, AgentEvent, AgentId, Role, ThreatSignature};
use crate::error::{Error, Result};
use crate::traffic::FlowHistogram;

const TOPOLOGY_STREAM: u64 = 0x7090_1067;
const PAIR_STREAM: u64 = 0x9A12_5E1E;

pub const EVENT_HEADER: &str = "t,agent_id,event,detail";

/// One event-log record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimEvent {
    pub t: usize,
    pub agent: String,
    pub event: &'static str,
    pub detail: String,
}

impl fmt::Display for SimEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.t, self.agent, self.event, self.detail)
    }
}

#[derive(Clone, Debug, Default)]
struct Window {
    counts: BTreeMap<SimFlow, u64>,
    fill: u64,
    attack: u64,
}

#[derive(Clone, Debug, Default)]
struct Tally {
    attack_windows: u64,
    attack_alerts: u64,
    clean_windows: u64,
    clean_alerts: u64,
    marginal_windows: u64,
    location_windows: [u64; LOCATION_BINS],
    location_alerts: [u64; LOCATION_BINS],
}

#[derive(Clone, Debug)]
pub struct SimWorld {
    cfg: SimConfig,
    topo: Arc<Topology>,
    placement: Arc<Placement>,
    router: Router,
    legit: Arc<LegitSchedule>,
    attack: AttackPlan,
    agents: Vec<Option<Agent<SimFlow>>>,
    windows: Vec<Window>,
    in_flight: Vec<(u32, SimFlow, u64)>,
    /// Sorted nodes currently blocking each flow.
    blockers: BTreeMap<SimFlow, Vec<u32>>,
    signals: Vec<(AgentId, ActivationSignal<SimFlow>)>,
    legit_counts: Counts,
    attack_counts: Counts,
    tally: Tally,
    location: Vec<usize>,
    legit_blocked: BTreeSet<SimFlow>,
    quiet_step: Option<usize>,
    since_quiet: Vec<usize>,
    violated: Vec<bool>,
    events: Vec<SimEvent>,
    log_events: bool,
    t: usize,
    finished: bool,
}

/// The seeded topology a config describes.
pub(crate) fn build_topology(cfg: &SimConfig) -> Result<Topology> {
    generate_topology(
        cfg.nodes,
        cfg.branching,
        cfg.cyclic,
        cfg.capacity,
        mix(cfg.seed, TOPOLOGY_STREAM),
    )
}

/// Distinct, non-adjacent ordered node pairs, or all distinct pairs when
/// the graph is complete.
pub(crate) fn candidate_pairs(topo: &Topology) -> Vec<(u32, u32)> {
    let n = topo.node_count() as u32;
    let mut pairs: Vec<(u32, u32)> = (0..n)
        .flat_map(|s| (0..n).map(move |t| (s, t)))
        .filter(|&(s, t)| s != t && !topo.has_edge(s, t))
        .collect();
    if pairs.is_empty() {
        pairs = (0..n)
            .flat_map(|s| (0..n).map(move |t| (s, t)))
            .filter(|&(s, t)| s != t)
            .collect();
    }
    pairs
}

impl SimWorld {
    /// Builds the world for `cfg`, generating the topology from the seed.
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        Self::with_topology(cfg, Arc::new(build_topology(cfg)?))
    }

    /// Builds the world on a given topology; `cfg.nodes` is ignored.
    pub fn with_topology(cfg: &SimConfig, topo: Arc<Topology>) -> Result<Self> {
        let mut cfg = cfg.clone();
        cfg.nodes = topo.node_count();
        cfg.validate()?;
        let legit = Arc::new(LegitSchedule::new(&topo, &cfg));
        Self::with_parts(&cfg, topo, legit)
    }

    /// Builds the world from a shared topology and legitimate schedule.
    pub fn with_parts(cfg: &SimConfig, topo: Arc<Topology>, legit: Arc<LegitSchedule>) -> Result<Self> {
        let n = topo.node_count();
        if cfg.nodes != n {
            return Err(Error::config(format!(
                "config names {} nodes but the topology has {n}",
                cfg.nodes
            )));
        }
        cfg.validate()?;
        let placement = Arc::new(place_agents(&topo));
        let mut agents: Vec<Option<Agent<SimFlow>>> = Vec::with_capacity(n);
        for v in 0..n as u32 {
            agents.push(match placement.role(v) {
                SensorRole::Innate => {
                    let scope = match cfg.mode {
                        ResponseMode::Adaptive => topo
                            .neighbors(v)
                            .iter()
                            .filter(|&&u| placement.role(u) == SensorRole::Adaptive)
                            .map(|&u| u as AgentId)
                            .collect(),
                        ResponseMode::Innate => Vec::new(),
                    };
                    Some(Agent::innate(v as AgentId, cfg.agent, scope)?)
                }
                // without signalling an adaptive sensor can never act
                SensorRole::Adaptive if cfg.mode == ResponseMode::Adaptive => {
                    Some(Agent::adaptive(v as AgentId, cfg.agent)?)
                }
                _ => None,
            });
        }
        let (source, target) = match (cfg.attack_source, cfg.attack_target) {
            (Some(s), Some(t)) => (s, t),
            (s, t) => {
                let pairs: Vec<(u32, u32)> = candidate_pairs(&topo)
                    .into_iter()
                    .filter(|&(a, b)| s.is_none_or(|s| s == a) && t.is_none_or(|t| t == b))
                    .collect();
                if pairs.is_empty() {
                    return Err(Error::config("no usable attack source/target pair"));
                }
                pairs[(mix(cfg.seed, PAIR_STREAM) % pairs.len() as u64) as usize]
            }
        };
        let router = Router::new(Arc::clone(&topo));
        let attack = AttackPlan::new(&topo, cfg, source, target, cfg.attack_power);
        let mut world = SimWorld {
            cfg: cfg.clone(),
            placement,
            router,
            legit,
            attack,
            agents,
            windows: vec![Window::default(); n],
            in_flight: Vec::new(),
            blockers: BTreeMap::new(),
            signals: Vec::new(),
            legit_counts: Counts::default(),
            attack_counts: Counts::default(),
            tally: Tally::default(),
            location: vec![0; n],
            legit_blocked: BTreeSet::new(),
            quiet_step: None,
            since_quiet: vec![0; n],
            violated: vec![false; n],
            events: Vec::new(),
            log_events: true,
            t: 0,
            finished: false,
            topo,
        };
        world.set_attack(source, target, cfg.attack_power)?;
        Ok(world)
    }

    /// Re-aims the flood. Only allowed before it starts, so a world advanced
    /// to the attack start can be cloned and branched per pair.
    pub fn set_attack(&mut self, source: u32, target: u32, power: f64) -> Result<()> {
        let n = self.topo.node_count() as u32;
        if source >= n || target >= n || source == target {
            return Err(Error::config(format!("bad attack pair ({source}, {target})")));
        }
        if !(0.0..=1.0).contains(&power) {
            return Err(Error::config(format!("attack power must lie in [0, 1], got {power}")));
        }
        if self.t > self.cfg.attack_start {
            return Err(Error::config("the flood has already started"));
        }
        self.cfg.attack_source = Some(source);
        self.cfg.attack_target = Some(target);
        self.cfg.attack_power = power;
        self.attack = AttackPlan::new(&self.topo, &self.cfg, source, target, power);
        for a in 0..n {
            let ds = f64::from(self.router.distance(source, a));
            let dt = f64::from(self.router.distance(a, target));
            self.location[a as usize] = location_bin(ds / (ds + dt));
        }
        Ok(())
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn shared_topology(&self) -> Arc<Topology> {
        Arc::clone(&self.topo)
    }

    pub fn placement(&self) -> &Placement {
        &self.placement
    }

    pub fn attack(&self) -> &AttackPlan {
        &self.attack
    }

    pub fn agent(&self, node: u32) -> Option<&Agent<SimFlow>> {
        self.agents.get(node as usize).and_then(Option::as_ref)
    }

    /// Current step counter.
    pub fn now(&self) -> usize {
        self.t
    }

    pub fn is_finished(&self) -> bool {
        self.finished || self.t >= self.cfg.steps
    }

    pub fn legit_counts(&self) -> Counts {
        self.legit_counts
    }

    pub fn attack_counts(&self) -> Counts {
        self.attack_counts
    }

    /// Turns event recording on or off; metrics are unaffected.
    pub fn set_event_log(&mut self, on: bool) {
        self.log_events = on;
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    /// Nodes currently blocking `flow`.
    pub fn blockers(&self, flow: &SimFlow) -> &[u32] {
        self.blockers.get(flow).map_or(&[], Vec::as_slice)
    }

    /// Packets currently at each node, as `(node, flow, count)`.
    pub fn in_flight(&self) -> &[(u32, SimFlow, u64)] {
        &self.in_flight
    }

    /// Queues a signal for delivery at the start of the next step.
    pub fn queue_signal(&mut self, to: AgentId, signal: ActivationSignal<SimFlow>) {
        self.signals.push((to, signal));
    }

    /// Hops `flow` would take from `from` under the current block tables.
    /// Ends at the destination, or at the node that drops it.
    pub fn path_of(&mut self, from: u32, flow: &SimFlow) -> Vec<u32> {
        let mut path = vec![from];
        let mut at = from;
        while at != flow.dst && self.blockers(flow).binary_search(&at).is_err() {
            let bl = self.route_blockers(flow);
            match self.router.next_hop(at, flow, &bl) {
                Hop::Next(v) => {
                    at = v;
                    path.push(v);
                }
                Hop::NoPath => break,
            }
        }
        path
    }

    fn route_blockers(&self, flow: &SimFlow) -> Vec<u32> {
        self.blockers(flow)
            .iter()
            .copied()
            .filter(|&v| v != flow.dst)
            .collect()
    }

    fn is_attack(&self, flow: &SimFlow) -> bool {
        flow.src as usize >= self.topo.node_count()
    }

    /// Whether an adaptive sensor still holds an activation naming a flood
    /// flow. Innate sensors never tighten `K`, so they are not counted.
    fn flood_activations(&self, agent: &Agent<SimFlow>) -> bool {
        agent.role() == Role::Adaptive
            && agent
                .activations()
                .iter()
                .any(|a| a.signature.suspects.iter().any(|f| self.is_attack(f)))
    }

    fn name(&self, v: u32) -> String {
        node_name(v, self.topo.node_count())
    }

    fn fmt_flow(&self, f: &SimFlow) -> String {
        let src = if self.is_attack(f) {
            format!("s{}", f.src)
        } else {
            self.name(f.src)
        };
        format!("{src}>{}:{}", self.name(f.dst), f.dport)
    }

    fn fmt_sig(&self, sig: &ThreatSignature<SimFlow>) -> String {
        sig.suspects
            .iter()
            .map(|f| self.fmt_flow(f))
            .collect::<Vec<_>>()
            .join("|")
    }

    fn log(&mut self, node: u32, obs: Option<usize>, share: Option<f64>, events: Vec<AgentEvent<SimFlow>>) {
        if !self.log_events {
            return;
        }
        for e in events {
            let mut parts: Vec<String> = Vec::new();
            if let Some(o) = obs {
                parts.push(format!("obs={o}"));
            }
            match &e {
                AgentEvent::Alert { signature, k, replica } => {
                    parts.push(format!("k={k:.6}"));
                    parts.push(format!("replica={}", u8::from(*replica)));
                    parts.push(format!("dst={}", self.name(signature.dst)));
                    parts.push(format!("dport={}", signature.dport));
                    parts.push(format!("suspects={}", self.fmt_sig(signature)));
                }
                AgentEvent::Inconclusive { k } => {
                    parts.push(format!("k={k:.6}"));
                    parts.push("inconclusive=1".into());
                }
                AgentEvent::Block { flows } => {
                    let legit = flows.iter().filter(|f| !self.is_attack(f)).count();
                    parts.push(format!(
                        "flows={}",
                        flows.iter().map(|f| self.fmt_flow(f)).collect::<Vec<_>>().join("|")
                    ));
                    parts.push(format!("legit={legit}"));
                }
                AgentEvent::SignalSent { to, k } => {
                    parts.push(format!("to={}", self.name(*to as u32)));
                    parts.push(format!("k={k:.6}"));
                }
                AgentEvent::SignalReceived { from, k, held_k } => {
                    parts.push(format!("from={}", self.name(*from as u32)));
                    parts.push(format!("k={k:.6}"));
                    parts.push(format!("held_k={held_k:.6}"));
                }
                AgentEvent::ActivationExpired { dst, dport } => {
                    parts.push(format!("dst={}", self.name(*dst)));
                    parts.push(format!("dport={dport}"));
                }
                AgentEvent::Standby => {}
            }
            if let (Some(s), AgentEvent::Alert { .. } | AgentEvent::Inconclusive { .. }) = (share, &e) {
                parts.push(format!("attack={s:.3}"));
            }
            self.events.push(SimEvent {
                t: self.t,
                agent: self.name(node),
                event: e.name(),
                detail: parts.join(";"),
            });
        }
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<()> {
        let s = self.t;
        let n = self.topo.node_count();

        for (to, sig) in std::mem::take(&mut self.signals) {
            let Some(agent) = self.agents.get_mut(to).and_then(Option::as_mut) else {
                continue;
            };
            let ev = agent.receive_signal(&sig);
            self.log(to as u32, None, None, ev);
        }

        let mut bundles = std::mem::take(&mut self.in_flight);
        for (f, c) in self.legit.at(s) {
            bundles.push((f.src, f, c));
            self.legit_counts.injected += c;
        }
        for (f, c) in self.attack.at(s) {
            bundles.push((self.attack.source, f, c));
            self.attack_counts.injected += c;
        }
        bundles.sort_unstable_by_key(|b| (b.0, b.1));
        let mut merged: Vec<(u32, SimFlow, u64)> = Vec::with_capacity(bundles.len());
        for b in bundles {
            match merged.last_mut() {
                Some(last) if last.0 == b.0 && last.1 == b.1 => last.2 += b.2,
                _ => merged.push(b),
            }
        }

        let mut diffs: Vec<(u32, Vec<SimFlow>, Vec<SimFlow>)> = Vec::new();
        let mut i = 0;
        while i < merged.len() {
            let node = merged[i].0;
            let mut j = i;
            while j < merged.len() && merged[j].0 == node {
                j += 1;
            }
            if self.agents[node as usize].is_some() {
                let group: Vec<(SimFlow, u64)> = merged[i..j].iter().map(|b| (b.1, b.2)).collect();
                self.observe(node, group, &mut diffs)?;
            }
            i = j;
        }

        let mut next: Vec<(u32, SimFlow, u64)> = Vec::with_capacity(merged.len());
        for (v, f, c) in merged {
            let attack = f.src as usize >= n;
            let blocked = self.blockers(&f).binary_search(&v).is_ok();
            let hop = if blocked || v == f.dst {
                None
            } else {
                let bl = self.route_blockers(&f);
                Some(self.router.next_hop(v, &f, &bl))
            };
            let counts = if attack {
                &mut self.attack_counts
            } else {
                &mut self.legit_counts
            };
            match hop {
                None if blocked => counts.dropped_block += c,
                None => counts.delivered += c,
                Some(Hop::NoPath) => counts.dropped_nopath += c,
                Some(Hop::Next(u)) => next.push((u, f, c)),
            }
        }
        self.legit_counts.in_flight = 0;
        self.attack_counts.in_flight = 0;
        for &(_, f, c) in &next {
            if f.src as usize >= n {
                self.attack_counts.in_flight += c;
            } else {
                self.legit_counts.in_flight += c;
            }
        }
        self.in_flight = next;

        for (node, added, removed) in diffs {
            for f in added {
                let list = self.blockers.entry(f).or_default();
                if let Err(pos) = list.binary_search(&node) {
                    list.insert(pos, node);
                }
                if !self.is_attack(&f) {
                    self.legit_blocked.insert(f);
                }
            }
            for f in removed {
                if let Some(list) = self.blockers.get_mut(&f) {
                    if let Ok(pos) = list.binary_search(&node) {
                        list.remove(pos);
                    }
                    if list.is_empty() {
                        self.blockers.remove(&f);
                    }
                }
            }
        }

        if self.quiet_step.is_none()
            && s + 1 >= self.attack.end()
            && self.attack_counts.in_flight == 0
            && self.windows.iter().all(|w| w.attack == 0)
        {
            self.quiet_step = Some(s);
        }
        if self.cfg.stop_when_quiet && self.quiet_step.is_some() {
            // an agent already counted as a violation cannot change the outcome
            let undecided = self
                .agents
                .iter()
                .enumerate()
                .any(|(v, a)| a.as_ref().is_some_and(|a| !self.violated[v] && self.flood_activations(a)));
            if !undecided {
                self.finished = true;
            }
        }
        self.t += 1;
        Ok(())
    }

    /// Feeds one step's bundles at `node` into its window, processing every
    /// window that fills. A bundle straddling a window boundary is split
    /// across flows by largest remainder.
    fn observe(
        &mut self,
        node: u32,
        mut group: Vec<(SimFlow, u64)>,
        diffs: &mut Vec<(u32, Vec<SimFlow>, Vec<SimFlow>)>,
    ) -> Result<()> {
        let m = self.cfg.packets_per_obs as u64;
        let n = self.topo.node_count() as u32;
        let mut total: u64 = group.iter().map(|g| g.1).sum();
        while total > 0 {
            let need = m - self.windows[node as usize].fill;
            let take = if total <= need {
                group.iter().map(|g| g.1).collect()
            } else {
                largest_remainder(&group, total, need)
            };
            let w = &mut self.windows[node as usize];
            let mut taken = 0;
            for (g, &k) in group.iter_mut().zip(&take) {
                if k == 0 {
                    continue;
                }
                *w.counts.entry(g.0).or_insert(0) += k;
                w.fill += k;
                if g.0.src >= n {
                    w.attack += k;
                }
                g.1 -= k;
                taken += k;
            }
            total -= taken;
            if w.fill == m {
                let w = std::mem::take(&mut self.windows[node as usize]);
                self.process_window(node, w, diffs)?;
            }
        }
        Ok(())
    }

    fn process_window(
        &mut self,
        node: u32,
        w: Window,
        diffs: &mut Vec<(u32, Vec<SimFlow>, Vec<SimFlow>)>,
    ) -> Result<()> {
        let hist = FlowHistogram::from_counts(w.counts);
        let share = w.attack as f64 / w.fill as f64;
        let agent = self.agents[node as usize].as_mut().expect("sensor node");
        let step = agent.process(&hist)?;
        let holds_flood = self.agents[node as usize]
            .as_ref()
            .is_some_and(|a| self.flood_activations(a));
        if step.evaluating {
            if w.attack == 0 {
                self.tally.clean_windows += 1;
                self.tally.clean_alerts += u64::from(step.alerted);
            } else if share >= self.cfg.attack_share_threshold {
                let bin = self.location[node as usize];
                self.tally.attack_windows += 1;
                self.tally.location_windows[bin] += 1;
                if step.alerted {
                    self.tally.attack_alerts += 1;
                    self.tally.location_alerts[bin] += 1;
                }
            } else {
                self.tally.marginal_windows += 1;
            }
        }
        if self.quiet_step.is_some() {
            let c = &mut self.since_quiet[node as usize];
            *c += 1;
            if *c == self.cfg.agent.quarantine_q && holds_flood {
                self.violated[node as usize] = true;
            }
        }
        if !step.blocks_added.is_empty() || !step.blocks_removed.is_empty() {
            diffs.push((node, step.blocks_added, step.blocks_removed));
        }
        self.signals.extend(step.signals);
        self.log(node, Some(step.t), Some(share), step.events);
        Ok(())
    }

    /// Steps until the horizon or an early stop.
    pub fn run_to_end(&mut self) -> Result<()> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(())
    }

    /// Steps until the counter reaches `t` (or the run finishes).
    pub fn run_until(&mut self, t: usize) -> Result<()> {
        while self.t < t && !self.is_finished() {
            self.step()?;
        }
        Ok(())
    }

    pub fn report(&self) -> MetricsReport {
        let q = self.cfg.agent.quarantine_q;
        let mut unresolved = 0;
        for (v, a) in self.agents.iter().enumerate() {
            if let Some(a) = a {
                if self.flood_activations(a) && !self.violated[v] && self.since_quiet[v] < q {
                    unresolved += 1;
                }
            }
        }
        MetricsReport {
            mode: self.cfg.mode,
            nodes: self.topo.node_count(),
            source: self.attack.source,
            target: self.attack.target,
            attack_power: self.attack.power,
            path_hops: self.router.distance(self.attack.source, self.attack.target),
            steps_run: self.t,
            legit: self.legit_counts,
            attack: self.attack_counts,
            attack_windows: self.tally.attack_windows,
            attack_alerts: self.tally.attack_alerts,
            clean_windows: self.tally.clean_windows,
            clean_alerts: self.tally.clean_alerts,
            marginal_windows: self.tally.marginal_windows,
            location_windows: self.tally.location_windows,
            location_alerts: self.tally.location_alerts,
            legit_flows_blocked: self.legit_blocked.len() as u64,
            blocked_threshold: self.cfg.blocked_threshold,
            quiet_step: self.quiet_step,
            quiescence_violations: self.violated.iter().filter(|&&v| v).count() as u64,
            unresolved,
        }
    }

    /// Event log with its header line.
    pub fn event_log(&self) -> String {
        let mut s = String::with_capacity(64 * (self.events.len() + 1));
        s.push_str(EVENT_HEADER);
        s.push('\n');
        for e in &self.events {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        s
    }
}

/// Splits `need` of `total` packets across `group` in proportion to the
/// counts, giving leftover units to the largest remainders (earlier entries
/// on ties).
fn largest_remainder(group: &[(SimFlow, u64)], total: u64, need: u64) -> Vec<u64> {
    let mut take = Vec::with_capacity(group.len());
    let mut rems = Vec::with_capacity(group.len());
    let mut assigned = 0;
    for (i, &(_, c)) in group.iter().enumerate() {
        let prod = u128::from(c) * u128::from(need);
        let q = (prod / u128::from(total)) as u64;
        take.push(q);
        rems.push((prod % u128::from(total), i));
        assigned += q;
    }
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rems.iter().take((need - assigned) as usize) {
        take[i] += 1;
    }
    take
}

/// Runs `cfg` to its horizon.
pub fn run(cfg: &SimConfig) -> Result<(Vec<SimEvent>, MetricsReport)> {
    let mut w = SimWorld::new(cfg)?;
    w.run_to_end()?;
    let report = w.report();
    Ok((w.events, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::SmoothingParams;

    fn small() -> SimConfig {
        let mut c = SimConfig {
            nodes: 10,
            steps: 700,
            attack_start: 400,
            attack_steps: 100,
            seed: 11,
            ..Default::default()
        };
        c.agent.detector.params = Some(SmoothingParams::new(0.2, 0.1, 0.1).unwrap());
        c
    }

    #[test]
    fn remainder_split_is_exact() {
        let f = |s| SimFlow { src: s, dst: 0, dport: 0 };
        let g = vec![(f(1), 5), (f(2), 3), (f(3), 2)];
        let t = largest_remainder(&g, 10, 7);
        assert_eq!(t.iter().sum::<u64>(), 7);
        assert_eq!(t, vec![4, 2, 1]);
        assert!(t.iter().zip(&g).all(|(a, b)| *a <= b.1));
    }

    #[test]
    fn conservation_every_step() {
        let mut w = SimWorld::new(&small()).unwrap();
        while !w.is_finished() {
            w.step().unwrap();
            assert!(w.legit_counts().is_conserved());
            assert!(w.attack_counts().is_conserved());
        }
        assert!(w.attack_counts().injected > 0);
    }

    #[test]
    fn deterministic() {
        let (ea, ra) = run(&small()).unwrap();
        let (eb, rb) = run(&small()).unwrap();
        assert_eq!(ea, eb);
        assert_eq!(ra.to_csv(), rb.to_csv());
    }

    #[test]
    fn empty_schedule_only_advances_clock() {
        let cfg = SimConfig {
            legit_volume: 0.0,
            attack_power: 0.0,
            ..small()
        };
        let mut w = SimWorld::new(&cfg).unwrap();
        for _ in 0..50 {
            w.step().unwrap();
        }
        assert_eq!(w.now(), 50);
        assert!(w.events().is_empty());
        assert!(w.in_flight().is_empty());
        assert_eq!(w.legit_counts(), Counts::default());
        assert_eq!(w.attack_counts(), Counts::default());
    }

    #[test]
    fn no_flood_means_no_positives() {
        let cfg = SimConfig {
            attack_power: 0.0,
            ..small()
        };
        let (_, r) = run(&cfg).unwrap();
        assert_eq!(r.attack.injected, 0);
        assert_eq!(r.tpr(), None);
        assert_eq!(r.blocked(), None);
        assert!(r.fpr().is_some());
    }

    #[test]
    fn branch_equals_fresh() {
        let cfg = small();
        let mut prefix = SimWorld::new(&cfg).unwrap();
        prefix.run_until(cfg.attack_start).unwrap();
        let pairs = candidate_pairs(prefix.topology());
        for &(s, t) in pairs.iter().take(3) {
            let mut b = prefix.clone();
            b.set_attack(s, t, 0.35).unwrap();
            b.run_to_end().unwrap();
            let fresh_cfg = SimConfig {
                attack_source: Some(s),
                attack_target: Some(t),
                attack_power: 0.35,
                ..cfg.clone()
            };
            let mut f = SimWorld::new(&fresh_cfg).unwrap();
            f.run_to_end().unwrap();
            assert_eq!(b.event_log(), f.event_log());
            assert_eq!(b.report(), f.report());
        }
    }

    #[test]
    fn strictest_directive_wins() {
        let cfg = small();
        let mut w = SimWorld::new(&cfg).unwrap();
        let da = w.placement().da_nodes[0];
        let sig = ThreatSignature {
            suspects: vec![SimFlow { src: 500, dst: da, dport: 80 }],
            dst: da,
            dport: 80,
            first_seen: 0,
        };
        for (origin, k) in [(1, 1.5), (2, 0.9)] {
            w.queue_signal(
                da as AgentId,
                ActivationSignal {
                    origin,
                    signature: sig.clone(),
                    k_directive: k,
                    issued_t: 0,
                },
            );
        }
        w.step().unwrap();
        let a = w.agent(da).unwrap();
        assert_eq!(a.activations().len(), 1);
        assert!((a.k_current() - 0.9).abs() < 1e-12);
        let received = w.events().iter().filter(|e| e.event == "signal_received").count();
        assert_eq!(received, 2);
    }
}
