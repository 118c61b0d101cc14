//! Paired innate/adaptive runs over network populations and figure tables.
//!
//! For each network the world is advanced once per response mode up to the
//! flood start, then cloned for every attack pair. Nothing before the flood
//! depends on the pair, so each branch equals a fresh run.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ResponseMode, SimConfig};
use super::metrics::{MetricsReport, LOCATION_BINS};
use super::mix;
use super::topology::Topology;
use super::traffic::LegitSchedule;
use super::world::{build_topology, SimWorld};
use crate::error::{Error, Result};

const NETWORK_STREAM: u64 = 0x0E75_EED5;
const SAMPLE_STREAM: u64 = 0x5A3B_1E00;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    /// Detection rate by agent position along the attack path.
    Location,
    /// Rates by attack power.
    Power,
    /// Rates by legitimate load.
    Congestion,
    /// Mitigation by source-target hop count.
    PathLength,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Location => "location",
            SweepAxis::Power => "power",
            SweepAxis::Congestion => "congestion",
            SweepAxis::PathLength => "pathlen",
        }
    }

    /// Output file name for the axis.
    pub fn file_name(self) -> &'static str {
        match self {
            SweepAxis::Location => "fig10.csv",
            SweepAxis::Power => "fig11.csv",
            SweepAxis::Congestion => "fig12.csv",
            SweepAxis::PathLength => "fig13.csv",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "location" => Ok(SweepAxis::Location),
            "power" => Ok(SweepAxis::Power),
            "congestion" => Ok(SweepAxis::Congestion),
            "pathlen" | "path_length" => Ok(SweepAxis::PathLength),
            _ => Err(Error::config(format!(
                "unknown axis {s:?} (expected location, power, congestion or pathlen)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairSelection {
    /// Every distinct, non-adjacent ordered pair.
    All,
    /// A seeded sample of at most this many pairs per network.
    Sample(usize),
}

impl FromStr for PairSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(PairSelection::All);
        }
        s.parse()
            .map(PairSelection::Sample)
            .map_err(|_| Error::config(format!("pairs must be `all` or a count, got {s:?}")))
    }
}

impl fmt::Display for PairSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairSelection::All => f.write_str("all"),
            PairSelection::Sample(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: SimConfig,
    pub axis: SweepAxis,
    /// Attack powers (power axis), legitimate volumes (congestion axis), or
    /// powers assigned round-robin to pairs (location and path-length axes).
    pub grid: Vec<f64>,
    /// Number of seeded networks.
    pub networks: usize,
    /// Node counts spread evenly over this range; `None` keeps `base.nodes`.
    pub node_range: Option<(usize, usize)>,
    pub pairs: PairSelection,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::config("sweep grid is empty"));
        }
        if self.networks == 0 {
            return Err(Error::config("sweep needs at least one network"));
        }
        if let Some((lo, hi)) = self.node_range {
            if lo < 3 || lo > hi {
                return Err(Error::config(format!("bad node range {lo}..={hi}")));
            }
        }
        for &g in &self.grid {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::config(format!("grid value {g} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Configuration of network `i`, before a pair is chosen.
    pub fn network(&self, i: usize) -> SimConfig {
        let mut cfg = self.base.clone();
        cfg.seed = mix(self.base.seed, mix(NETWORK_STREAM, i as u64));
        if let Some((lo, hi)) = self.node_range {
            cfg.nodes = if self.networks == 1 {
                lo
            } else {
                lo + ((hi - lo) * i + (self.networks - 1) / 2) / (self.networks - 1)
            };
        }
        cfg.attack_source = None;
        cfg.attack_target = None;
        cfg.stop_when_quiet = true;
        cfg
    }
}

/// Distinct ordered pairs that are not directly connected.
pub fn feasible_pairs(topo: &Topology) -> Vec<(u32, u32)> {
    let n = topo.node_count() as u32;
    (0..n)
        .flat_map(|s| (0..n).map(move |t| (s, t)))
        .filter(|&(s, t)| s != t && !topo.has_edge(s, t))
        .collect()
}

/// One attack pair run under both response modes.
#[derive(Clone, Debug, PartialEq)]
pub struct PairOutcome {
    pub network: usize,
    pub nodes: usize,
    pub source: u32,
    pub target: u32,
    pub power: f64,
    pub legit_volume: f64,
    pub innate: MetricsReport,
    pub adaptive: MetricsReport,
}

impl PairOutcome {
    pub fn report(&self, mode: ResponseMode) -> &MetricsReport {
        match mode {
            ResponseMode::Innate => &self.innate,
            ResponseMode::Adaptive => &self.adaptive,
        }
    }

    /// Adaptive response blocked at least as many flood packets.
    pub fn mitigation_monotone(&self) -> bool {
        self.adaptive.attack.dropped_block >= self.innate.attack.dropped_block
    }
}

fn run_network(spec: &SweepSpec, i: usize) -> Result<Vec<PairOutcome>> {
    let cfg = spec.network(i);
    cfg.validate()?;
    let topo = Arc::new(build_topology(&cfg)?);
    let mut pairs = feasible_pairs(&topo);
    if let PairSelection::Sample(k) = spec.pairs {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, SAMPLE_STREAM));
        pairs.shuffle(&mut rng);
        pairs.truncate(k);
        pairs.sort_unstable();
    }
    // (legit volume, attack power) per branch
    let loads: Vec<f64> = match spec.axis {
        SweepAxis::Congestion => spec.grid.clone(),
        _ => vec![cfg.legit_volume],
    };
    let mut out = Vec::new();
    for &load in &loads {
        let lcfg = SimConfig {
            legit_volume: load,
            ..cfg.clone()
        };
        let legit = Arc::new(LegitSchedule::new(&topo, &lcfg));
        let mut prefixes = Vec::with_capacity(2);
        for mode in [ResponseMode::Innate, ResponseMode::Adaptive] {
            let mcfg = SimConfig { mode, ..lcfg.clone() };
            let mut w = SimWorld::with_parts(&mcfg, Arc::clone(&topo), Arc::clone(&legit))?;
            w.set_event_log(false);
            w.run_until(mcfg.attack_start)?;
            prefixes.push(w);
        }
        for (pi, &(s, t)) in pairs.iter().enumerate() {
            let powers: Vec<f64> = match spec.axis {
                SweepAxis::Power => spec.grid.clone(),
                SweepAxis::Congestion => vec![cfg.attack_power],
                SweepAxis::Location | SweepAxis::PathLength => vec![spec.grid[pi % spec.grid.len()]],
            };
            for power in powers {
                let mut reports = Vec::with_capacity(2);
                for prefix in &prefixes {
                    let mut w = prefix.clone();
                    w.set_attack(s, t, power)?;
                    w.run_to_end()?;
                    reports.push(w.report());
                }
                let adaptive = reports.pop().expect("two modes");
                let innate = reports.pop().expect("two modes");
                out.push(PairOutcome {
                    network: i,
                    nodes: cfg.nodes,
                    source: s,
                    target: t,
                    power,
                    legit_volume: load,
                    innate,
                    adaptive,
                });
            }
        }
    }
    Ok(out)
}

/// Runs every network of the sweep; networks are spread over the available
/// cores and merged in network order.
pub fn run_pairs(spec: &SweepSpec) -> Result<Vec<PairOutcome>> {
    spec.validate()?;
    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(spec.networks);
    let mut results: Vec<Option<Result<Vec<PairOutcome>>>> = (0..spec.networks).map(|_| None).collect();
    if threads <= 1 {
        for (i, r) in results.iter_mut().enumerate() {
            *r = Some(run_network(spec, i));
        }
    } else {
        std::thread::scope(|scope| {
            let chunks: Vec<_> = results.chunks_mut(spec.networks.div_ceil(threads)).collect();
            let mut start = 0;
            for chunk in chunks {
                let first = start;
                start += chunk.len();
                scope.spawn(move || {
                    for (j, r) in chunk.iter_mut().enumerate() {
                        *r = Some(run_network(spec, first + j));
                    }
                });
            }
        });
    }
    let mut out = Vec::new();
    for r in results {
        out.extend(r.expect("every network ran")?);
    }
    Ok(out)
}

/// Running mean of per-run values.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Mean {
    pub sum: f64,
    pub count: u64,
}

impl Mean {
    pub fn add(&mut self, v: Option<f64>) {
        if let Some(v) = v {
            self.sum += v;
            self.count += 1;
        }
    }

    pub fn value(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModeStats {
    pub tpr: Mean,
    pub fpr: Mean,
    pub blocked: Mean,
}

impl ModeStats {
    fn add(&mut self, tpr: Option<f64>, fpr: Option<f64>, blocked: Option<f64>) {
        self.tpr.add(tpr);
        self.fpr.add(fpr);
        self.blocked.add(blocked);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub key: String,
    pub innate: ModeStats,
    pub adaptive: ModeStats,
}

impl SweepRow {
    fn stats_mut(&mut self, mode: ResponseMode) -> &mut ModeStats {
        match mode {
            ResponseMode::Innate => &mut self.innate,
            ResponseMode::Adaptive => &mut self.adaptive,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

fn row_index(rows: &mut Vec<SweepRow>, key: String) -> usize {
    if let Some(i) = rows.iter().position(|r| r.key == key) {
        return i;
    }
    rows.push(SweepRow {
        key,
        innate: ModeStats::default(),
        adaptive: ModeStats::default(),
    });
    rows.len() - 1
}

fn blocked_value(r: &MetricsReport) -> Option<f64> {
    r.blocked().map(|b| if b { 1.0 } else { 0.0 })
}

impl SweepTable {
    pub fn from_outcomes(axis: SweepAxis, grid: &[f64], outcomes: &[PairOutcome]) -> Self {
        let mut rows: Vec<SweepRow> = Vec::new();
        let mut keys: Vec<String> = match axis {
            SweepAxis::Location => (0..LOCATION_BINS)
                .map(|b| {
                    let w = 1.0 / LOCATION_BINS as f64;
                    format!("{:.1}-{:.1}", b as f64 * w, (b + 1) as f64 * w)
                })
                .collect(),
            SweepAxis::Power | SweepAxis::Congestion => grid.iter().map(|g| format!("{g:.2}")).collect(),
            SweepAxis::PathLength => {
                let mut h: Vec<u32> = outcomes.iter().map(|o| o.innate.path_hops).collect();
                h.sort_unstable();
                h.dedup();
                h.into_iter().map(|x| x.to_string()).collect()
            }
        };
        for k in keys.drain(..) {
            row_index(&mut rows, k);
        }
        for o in outcomes {
            for mode in [ResponseMode::Innate, ResponseMode::Adaptive] {
                let r = o.report(mode);
                match axis {
                    SweepAxis::Location => {
                        for b in 0..LOCATION_BINS {
                            rows[b].stats_mut(mode).add(r.location_tpr(b), None, None);
                        }
                    }
                    _ => {
                        let key = match axis {
                            SweepAxis::Power => format!("{:.2}", o.power),
                            SweepAxis::Congestion => format!("{:.2}", o.legit_volume),
                            _ => r.path_hops.to_string(),
                        };
                        let i = row_index(&mut rows, key);
                        rows[i].stats_mut(mode).add(r.tpr(), r.fpr(), blocked_value(r));
                    }
                }
            }
        }
        SweepTable { axis, rows }
    }

    pub fn header(&self) -> String {
        let mut h = String::from(match self.axis {
            SweepAxis::Location => "location_bin",
            SweepAxis::Power => "attack_power",
            SweepAxis::Congestion => "legit_volume",
            SweepAxis::PathLength => "path_hops",
        });
        for mode in ["innate", "adaptive"] {
            for m in ["tpr", "fpr", "blocked"] {
                let _ = write!(h, ",{mode}_{m}_mean,{mode}_{m}_count");
            }
        }
        h
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header();
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.key);
            for st in [&row.innate, &row.adaptive] {
                for m in [&st.tpr, &st.fpr, &st.blocked] {
                    let v = m.value().map_or_else(String::new, |x| format!("{x:.6}"));
                    let _ = write!(s, ",{v},{}", m.count);
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Runs the sweep and tabulates it along its axis.
pub fn sweep(spec: &SweepSpec) -> Result<(SweepTable, Vec<PairOutcome>)> {
    let outcomes = run_pairs(spec)?;
    Ok((SweepTable::from_outcomes(spec.axis, &spec.grid, &outcomes), outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::SmoothingParams;

    fn spec(axis: SweepAxis, grid: Vec<f64>) -> SweepSpec {
        let mut base = SimConfig {
            nodes: 8,
            steps: 700,
            attack_start: 400,
            attack_steps: 80,
            ..Default::default()
        };
        base.agent.detector.params = Some(SmoothingParams::new(0.2, 0.1, 0.1).unwrap());
        base.agent.quarantine_q = 10;
        SweepSpec {
            base,
            axis,
            grid,
            networks: 2,
            node_range: None,
            pairs: PairSelection::Sample(2),
        }
    }

    #[test]
    fn power_table_shape() {
        let grid: Vec<f64> = (1..=3).map(|i| f64::from(i) / 10.0).collect();
        let (table, outcomes) = sweep(&spec(SweepAxis::Power, grid)).unwrap();
        assert_eq!(table.rows.len(), 3);
        assert_eq!(outcomes.len(), 2 * 2 * 3);
        for row in &table.rows {
            assert_eq!(row.innate.fpr.count, 4);
        }
        let csv = table.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("attack_power,innate_tpr_mean,innate_tpr_count"));
    }

    #[test]
    fn repeatable() {
        let s = spec(SweepAxis::Location, vec![0.35]);
        let (a, _) = sweep(&s).unwrap();
        let (b, _) = sweep(&s).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.rows.len(), LOCATION_BINS);
    }

    #[test]
    fn node_range_spreads() {
        let mut s = spec(SweepAxis::PathLength, vec![0.35]);
        s.networks = 5;
        s.node_range = Some((8, 40));
        let nodes: Vec<usize> = (0..5).map(|i| s.network(i).nodes).collect();
        assert_eq!(nodes, vec![8, 16, 24, 32, 40]);
    }

    #[test]
    fn parse_axis_and_pairs() {
        assert_eq!("pathlen".parse::<SweepAxis>().unwrap(), SweepAxis::PathLength);
        assert!("bogus".parse::<SweepAxis>().is_err());
        assert_eq!("all".parse::<PairSelection>().unwrap(), PairSelection::All);
        assert_eq!("7".parse::<PairSelection>().unwrap(), PairSelection::Sample(7));
    }
}
