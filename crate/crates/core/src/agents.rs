//! Innate (`D_H`) and adaptive (`D_A`) sensor agents.
//!
//! Both roles run a [`StreamDetector`] over the entropy of the windows they
//! observe. A `D_H` blocks the flows it identifies and, for threats absent
//! from its immune memory, signals the `D_A`s in its scope. A `D_A` acts only
//! while it holds activations, and only against flows of the activating
//! signatures. Every activation carries a quarantine countdown that replicas
//! reset and clean observations run down.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::detector::{
    adapt_restriction, Assessment, DetectorConfig, DetectorVerdict, RestrictionState,
    StreamDetector, DEFAULT_K_FLOOR, DEFAULT_R_CAP,
};
use crate::entropy::{flow_probabilities, histogram_entropy};
use crate::error::{Error, Result};
use crate::identify::{blockable, identify_sources, IdentifyConfig};
use crate::traffic::{Flow, FlowHistogram};

pub const DEFAULT_QUARANTINE_Q: usize = 50;
pub const DEFAULT_MEMORY_CAPACITY: usize = 256;
pub const DEFAULT_JACCARD_MIN: f64 = 0.5;

pub type AgentId = usize;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentConfig {
    pub detector: DetectorConfig,
    pub identify: IdentifyConfig,
    pub renyi_alpha: f64,
    pub quarantine_q: usize,
    pub memory_capacity: usize,
    pub jaccard_min: f64,
    pub k_floor: f64,
    pub r_cap: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            detector: DetectorConfig::default(),
            identify: IdentifyConfig::default(),
            renyi_alpha: 1.0,
            quarantine_q: DEFAULT_QUARANTINE_Q,
            memory_capacity: DEFAULT_MEMORY_CAPACITY,
            jaccard_min: DEFAULT_JACCARD_MIN,
            k_floor: DEFAULT_K_FLOOR,
            r_cap: DEFAULT_R_CAP,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        if !(self.renyi_alpha >= 0.0 && self.renyi_alpha.is_finite()) {
            return Err(Error::param("renyi alpha must be finite and >= 0"));
        }
        if self.quarantine_q == 0 {
            return Err(Error::param("quarantine length must be at least 1"));
        }
        if self.memory_capacity == 0 {
            return Err(Error::param("memory capacity must be at least 1"));
        }
        if !(self.jaccard_min > 0.0 && self.jaccard_min <= 1.0) {
            return Err(Error::param("jaccard threshold must lie in (0, 1]"));
        }
        if self.identify.k_max == 0 {
            return Err(Error::param("k_max must be at least 1"));
        }
        RestrictionState::with_cap(self.detector.k_default()?, self.k_floor, self.r_cap)?;
        Ok(())
    }

    fn restriction(&self) -> RestrictionState {
        let k = self.detector.k_default().expect("validated");
        RestrictionState::with_cap(k, self.k_floor, self.r_cap).expect("validated")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreatSignature<F: Flow> {
    /// Sorted, non-empty.
    pub suspects: Vec<F>,
    pub dst: F::Node,
    pub dport: u16,
    pub first_seen: usize,
}

impl<F: Flow> ThreatSignature<F> {
    /// `dst` and `dport` are taken from the destination/port pair carrying
    /// the most suspect probability mass; ties go to the smaller pair.
    pub fn from_suspects(suspects: Vec<F>, dist: &[(F, f64)], first_seen: usize) -> Result<Self> {
        if suspects.is_empty() {
            return Err(Error::input("signature needs at least one suspect flow"));
        }
        let mut suspects = suspects;
        suspects.sort();
        suspects.dedup();
        let mut mass: BTreeMap<(F::Node, u16), f64> = BTreeMap::new();
        for f in &suspects {
            let p = dist
                .binary_search_by(|(k, _)| k.cmp(f))
                .map(|i| dist[i].1)
                .unwrap_or(0.0);
            *mass.entry((f.destination().clone(), f.port())).or_insert(0.0) += p;
        }
        let ((dst, dport), _) = mass
            .into_iter()
            .fold(None::<((F::Node, u16), f64)>, |best, (pair, m)| match best {
                Some((_, bm)) if bm >= m => best,
                _ => Some((pair, m)),
            })
            .expect("non-empty suspects");
        Ok(ThreatSignature {
            suspects,
            dst,
            dport,
            first_seen,
        })
    }

    pub fn contains(&self, flow: &F) -> bool {
        self.suspects.binary_search(flow).is_ok()
    }

    fn absorb(&mut self, other: &ThreatSignature<F>) {
        let merged: BTreeSet<F> = self.suspects.iter().chain(&other.suspects).cloned().collect();
        self.suspects = merged.into_iter().collect();
    }
}

/// `(after \ before, before \ after)` for sorted, deduplicated inputs.
fn sorted_diff<T: Ord + Clone>(before: &[T], after: &[T]) -> (Vec<T>, Vec<T>) {
    let (mut added, mut removed) = (Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < before.len() || j < after.len() {
        match (before.get(i), after.get(j)) {
            (Some(b), Some(a)) if b == a => {
                i += 1;
                j += 1;
            }
            (Some(b), Some(a)) if b < a => {
                removed.push(b.clone());
                i += 1;
            }
            (Some(b), None) => {
                removed.push(b.clone());
                i += 1;
            }
            (_, Some(a)) => {
                added.push(a.clone());
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    (added, removed)
}

/// `|a ∩ b| / |a ∪ b|` over sorted, deduplicated slices.
pub fn jaccard<T: Ord>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Same destination and port, and suspect sets at least `jaccard_min` alike.
pub fn signatures_match<F: Flow>(
    a: &ThreatSignature<F>,
    b: &ThreatSignature<F>,
    jaccard_min: f64,
) -> bool {
    a.dst == b.dst && a.dport == b.dport && jaccard(&a.suspects, &b.suspects) >= jaccard_min
}

/// Bounded store of recent signatures with oldest-first eviction.
#[derive(Clone, Debug)]
pub struct ImmuneMemory<F: Flow> {
    capacity: usize,
    jaccard_min: f64,
    entries: VecDeque<ThreatSignature<F>>,
}

impl<F: Flow> ImmuneMemory<F> {
    pub fn new(capacity: usize, jaccard_min: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::param("memory capacity must be at least 1"));
        }
        Ok(ImmuneMemory {
            capacity,
            jaccard_min,
            entries: VecDeque::new(),
        })
    }

    pub fn find(&self, sig: &ThreatSignature<F>) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| signatures_match(e, sig, self.jaccard_min))
    }

    /// Appends `sig`, returning the evicted oldest entry when full.
    pub fn insert(&mut self, sig: ThreatSignature<F>) -> Option<ThreatSignature<F>> {
        let evicted = if self.entries.len() == self.capacity {
            self.entries.pop_front()
        } else {
            None
        };
        self.entries.push_back(sig);
        evicted
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ThreatSignature<F>> {
        self.entries.iter()
    }

    fn refresh(&mut self, idx: usize, sig: &ThreatSignature<F>) {
        self.entries[idx].absorb(sig);
    }
}

pub fn memory_match<F: Flow>(memory: &ImmuneMemory<F>, sig: &ThreatSignature<F>) -> bool {
    memory.find(sig).is_some()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActivationSignal<F: Flow> {
    pub origin: AgentId,
    pub signature: ThreatSignature<F>,
    pub k_directive: f64,
    pub issued_t: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    /// Innate sensor, `D_H`.
    Innate,
    /// Adaptive sensor, `D_A`.
    Adaptive,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Innate => "H",
            Role::Adaptive => "A",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Standby,
    Vigilant,
    Active,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Standby => "standby",
            Mode::Vigilant => "vigilant",
            Mode::Active => "active",
        }
    }
}

/// One held threat: the signature, the restriction it is examined with, the
/// quarantine countdown, and the flows blocked on its behalf.
#[derive(Clone, Debug)]
pub struct Activation<F: Flow> {
    pub signature: ThreatSignature<F>,
    pub restriction: RestrictionState,
    pub remaining: usize,
    pub blocked: BTreeSet<F>,
    /// Signalling sensor; `None` for an innate sensor's own blocks.
    pub origin: Option<AgentId>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum AgentEvent<F: Flow> {
    Alert {
        signature: ThreatSignature<F>,
        k: f64,
        replica: bool,
    },
    /// Anomaly whose suspect cluster was too broad to act on.
    Inconclusive { k: f64 },
    Block { flows: Vec<F> },
    SignalSent { to: AgentId, k: f64 },
    SignalReceived { from: AgentId, k: f64, held_k: f64 },
    ActivationExpired { dst: F::Node, dport: u16 },
    Standby,
}

impl<F: Flow> AgentEvent<F> {
    pub fn name(&self) -> &'static str {
        match self {
            AgentEvent::Alert { .. } => "alert",
            AgentEvent::Inconclusive { .. } => "alert",
            AgentEvent::Block { .. } => "block",
            AgentEvent::SignalSent { .. } => "signal_sent",
            AgentEvent::SignalReceived { .. } => "signal_received",
            AgentEvent::ActivationExpired { .. } => "activation_expired",
            AgentEvent::Standby => "standby",
        }
    }
}

/// Result of processing one observation window.
#[derive(Clone, Debug)]
pub struct AgentStep<F: Flow> {
    /// Agent-local observation index.
    pub t: usize,
    /// Verdict at the default restriction; `None` during warm-up.
    pub verdict: Option<DetectorVerdict>,
    /// Whether this window counts toward detection rates: always for a warm
    /// `D_H`, for a `D_A` only while it held an activation.
    pub evaluating: bool,
    /// The agent raised an alert on this window.
    pub alerted: bool,
    pub blocks_added: Vec<F>,
    pub blocks_removed: Vec<F>,
    pub signals: Vec<(AgentId, ActivationSignal<F>)>,
    pub events: Vec<AgentEvent<F>>,
}

impl<F: Flow> AgentStep<F> {
    fn new(t: usize) -> Self {
        AgentStep {
            t,
            verdict: None,
            evaluating: false,
            alerted: false,
            blocks_added: Vec::new(),
            blocks_removed: Vec::new(),
            signals: Vec::new(),
            events: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Agent<F: Flow> {
    id: AgentId,
    role: Role,
    cfg: AgentConfig,
    detector: StreamDetector,
    activations: Vec<Activation<F>>,
    memory: ImmuneMemory<F>,
    /// Packet totals of recent clean windows.
    clean_volumes: VecDeque<u64>,
    /// `D_A` ids signalled on a new threat (innate sensors only).
    scope: Vec<AgentId>,
    seen: usize,
}

impl<F: Flow> Agent<F> {
    pub fn new(id: AgentId, role: Role, cfg: AgentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Agent {
            id,
            role,
            detector: StreamDetector::new(cfg.detector)?,
            memory: ImmuneMemory::new(cfg.memory_capacity, cfg.jaccard_min)?,
            cfg,
            activations: Vec::new(),
            clean_volumes: VecDeque::new(),
            scope: Vec::new(),
            seen: 0,
        })
    }

    /// Innate sensor that signals `scope` on new threats. An empty scope
    /// gives innate-only behavior.
    pub fn innate(id: AgentId, cfg: AgentConfig, scope: Vec<AgentId>) -> Result<Self> {
        let mut a = Self::new(id, Role::Innate, cfg)?;
        a.scope = scope;
        Ok(a)
    }

    pub fn adaptive(id: AgentId, cfg: AgentConfig) -> Result<Self> {
        Self::new(id, Role::Adaptive, cfg)
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        match self.role {
            Role::Innate => Mode::Vigilant,
            Role::Adaptive if self.activations.is_empty() => Mode::Standby,
            Role::Adaptive => Mode::Active,
        }
    }

    pub fn scope(&self) -> &[AgentId] {
        &self.scope
    }

    pub fn activations(&self) -> &[Activation<F>] {
        &self.activations
    }

    pub fn memory(&self) -> &ImmuneMemory<F> {
        &self.memory
    }

    pub fn detector(&self) -> &StreamDetector {
        &self.detector
    }

    pub fn k_default(&self) -> f64 {
        self.detector.k_default()
    }

    /// Smallest held restriction, or the default when idle.
    pub fn k_current(&self) -> f64 {
        self.activations
            .iter()
            .map(|a| a.restriction.k_current)
            .fold(self.k_default(), f64::min)
    }

    pub fn is_blocking(&self, flow: &F) -> bool {
        self.activations.iter().any(|a| a.blocked.contains(flow))
    }

    pub fn blocked_flows(&self) -> BTreeSet<F> {
        self.activations
            .iter()
            .flat_map(|a| a.blocked.iter().cloned())
            .collect()
    }

    /// Union of the block tables, sorted and deduplicated.
    fn blocked_sorted(&self) -> Vec<F> {
        let mut v: Vec<F> = self
            .activations
            .iter()
            .flat_map(|a| a.blocked.iter().cloned())
            .collect();
        if self.activations.len() > 1 {
            v.sort_unstable();
            v.dedup();
        }
        v
    }

    /// Observations processed so far.
    pub fn seen(&self) -> usize {
        self.seen
    }

    fn vol_leg(&self, fallback: u64) -> f64 {
        if self.clean_volumes.is_empty() {
            return fallback.max(1) as f64;
        }
        self.clean_volumes.iter().sum::<u64>() as f64 / self.clean_volumes.len() as f64
    }

    fn note_clean(&mut self, total: u64) {
        if self.clean_volumes.len() == self.cfg.detector.error_window {
            self.clean_volumes.pop_front();
        }
        self.clean_volumes.push_back(total);
    }

    /// Processes one full observation window.
    pub fn process(&mut self, hist: &FlowHistogram<F>) -> Result<AgentStep<F>> {
        if hist.is_empty() {
            return Err(Error::input("empty observation"));
        }
        let t = self.seen;
        self.seen += 1;
        let before = self.blocked_sorted();
        let h = histogram_entropy(hist, self.cfg.renyi_alpha)?;
        let assessment = self.detector.assess();
        let verdict = assessment.map(|a| a.verdict(h, self.detector.k_default()));
        let anomalous = verdict.is_some_and(|v| v.anomalous);
        self.detector.commit(h, !anomalous)?;

        let mut step = AgentStep::new(t);
        step.verdict = verdict;
        let mut refreshed = vec![false; self.activations.len()];
        match self.role {
            Role::Innate => {
                step.evaluating = verdict.is_some();
                if anomalous {
                    step.alerted = true;
                    self.innate_response(hist, t, &mut refreshed, &mut step)?;
                }
            }
            Role::Adaptive => {
                step.evaluating = !self.activations.is_empty() && assessment.is_some();
                if let Some(a) = assessment {
                    self.adaptive_response(hist, h, &a, &mut refreshed, &mut step);
                }
            }
        }
        if !anomalous {
            self.note_clean(hist.total());
        }
        self.quarantine_tick(&refreshed, &mut step);

        let after = self.blocked_sorted();
        if before != after {
            (step.blocks_added, step.blocks_removed) = sorted_diff(&before, &after);
        }
        Ok(step)
    }

    fn innate_response(
        &mut self,
        hist: &FlowHistogram<F>,
        t: usize,
        refreshed: &mut Vec<bool>,
        step: &mut AgentStep<F>,
    ) -> Result<()> {
        let k_default = self.detector.k_default();
        let dist = flow_probabilities(hist)?;
        let suspects = identify_sources(dist.as_slice(), t, &self.cfg.identify)?;
        let flows = blockable(&suspects, dist.as_slice());
        if flows.is_empty() {
            step.events.push(AgentEvent::Inconclusive { k: k_default });
            return Ok(());
        }
        let sig = ThreatSignature::from_suspects(flows, dist.as_slice(), t)?;
        let vol_atk: u64 = sig.suspects.iter().map(|f| hist.get(f)).sum();
        let seen_before = match self.memory.find(&sig) {
            Some(idx) => {
                self.memory.refresh(idx, &sig);
                true
            }
            None => {
                self.memory.insert(sig.clone());
                false
            }
        };
        step.events.push(AgentEvent::Alert {
            signature: sig.clone(),
            k: k_default,
            replica: seen_before,
        });
        let idx = self.hold(sig.clone(), self.cfg.restriction(), None, refreshed).index;
        let fresh: Vec<F> = sig
            .suspects
            .iter()
            .filter(|f| self.activations[idx].blocked.insert((*f).clone()))
            .cloned()
            .collect();
        if !fresh.is_empty() {
            step.events.push(AgentEvent::Block { flows: fresh });
        }
        if !seen_before && !self.scope.is_empty() {
            let directive =
                adapt_restriction(&self.cfg.restriction(), vol_atk as f64, self.vol_leg(hist.total()))?;
            for &to in &self.scope {
                step.events.push(AgentEvent::SignalSent {
                    to,
                    k: directive.k_current,
                });
                step.signals.push((
                    to,
                    ActivationSignal {
                        origin: self.id,
                        signature: sig.clone(),
                        k_directive: directive.k_current,
                        issued_t: t,
                    },
                ));
            }
        }
        Ok(())
    }

    fn adaptive_response(
        &mut self,
        hist: &FlowHistogram<F>,
        h: f64,
        assessment: &Assessment,
        refreshed: &mut [bool],
        step: &mut AgentStep<F>,
    ) {
        for (i, act) in self.activations.iter_mut().enumerate() {
            let k = act.restriction.k_current;
            if !assessment.verdict(h, k).anomalous {
                continue;
            }
            let present: Vec<F> = act
                .signature
                .suspects
                .iter()
                .filter(|f| hist.get(f) > 0)
                .cloned()
                .collect();
            if present.is_empty() {
                continue;
            }
            step.alerted = true;
            refreshed[i] = true;
            act.remaining = self.cfg.quarantine_q;
            step.events.push(AgentEvent::Alert {
                signature: act.signature.clone(),
                k,
                replica: true,
            });
            let fresh: Vec<F> = present
                .into_iter()
                .filter(|f| act.blocked.insert(f.clone()))
                .collect();
            if !fresh.is_empty() {
                step.events.push(AgentEvent::Block { flows: fresh });
            }
        }
    }

    /// Finds or creates the activation for `sig`, resetting its countdown.
    fn hold(
        &mut self,
        sig: ThreatSignature<F>,
        restriction: RestrictionState,
        origin: Option<AgentId>,
        refreshed: &mut Vec<bool>,
    ) -> Held {
        let q = self.cfg.quarantine_q;
        let found = self
            .activations
            .iter()
            .position(|a| signatures_match(&a.signature, &sig, self.cfg.jaccard_min));
        match found {
            Some(index) => {
                let act = &mut self.activations[index];
                act.signature.absorb(&sig);
                if restriction.k_current < act.restriction.k_current {
                    act.restriction.k_current = restriction.k_current;
                }
                act.remaining = q;
                if index < refreshed.len() {
                    refreshed[index] = true;
                }
                Held { index }
            }
            None => {
                self.activations.push(Activation {
                    signature: sig,
                    restriction,
                    remaining: q,
                    blocked: BTreeSet::new(),
                    origin,
                });
                refreshed.push(true);
                Held {
                    index: self.activations.len() - 1,
                }
            }
        }
    }

    fn quarantine_tick(&mut self, refreshed: &[bool], step: &mut AgentStep<F>) {
        let was_active = !self.activations.is_empty();
        let mut keep = Vec::with_capacity(self.activations.len());
        for (i, mut act) in std::mem::take(&mut self.activations).into_iter().enumerate() {
            if !refreshed.get(i).copied().unwrap_or(false) {
                act.remaining = act.remaining.saturating_sub(1);
            }
            if act.remaining == 0 {
                step.events.push(AgentEvent::ActivationExpired {
                    dst: act.signature.dst.clone(),
                    dport: act.signature.dport,
                });
            } else {
                keep.push(act);
            }
        }
        self.activations = keep;
        if self.role == Role::Adaptive && was_active && self.activations.is_empty() {
            step.events.push(AgentEvent::Standby);
        }
    }

    /// Applies an activation signal. A signal for a held signature keeps the
    /// smaller restriction and restarts the countdown; otherwise a new
    /// activation is created. Innate sensors ignore signals.
    pub fn receive_signal(&mut self, sig: &ActivationSignal<F>) -> Vec<AgentEvent<F>> {
        if self.role != Role::Adaptive {
            return Vec::new();
        }
        let mut restriction = self.cfg.restriction();
        restriction.k_current = sig
            .k_directive
            .clamp(restriction.k_floor, restriction.k_default);
        let mut refreshed = Vec::new();
        let held = self.hold(sig.signature.clone(), restriction, Some(sig.origin), &mut refreshed);
        vec![AgentEvent::SignalReceived {
            from: sig.origin,
            k: sig.k_directive,
            held_k: self.activations[held.index].restriction.k_current,
        }]
    }
}

struct Held {
    index: usize,
}
