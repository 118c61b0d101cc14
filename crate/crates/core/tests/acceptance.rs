//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always reach the terminal.
//! Correctness criteria (1, 2, 3, 6, 10) fail the target when they do not
//! hold. The empirical criteria (4, 5, 7, 8, 9) report what was measured;
//! a FAIL there is a property of the method at these settings, not of the
//! harness, and the target still exits 0.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;

use immunet::analyze::{analyze_records, AnalyzeConfig};
use immunet::entropy::{flow_probabilities, renyi_entropy, shannon_entropy, FlowDistribution};
use immunet::forecast::{fit_parameters, grid_values, init_state, one_step_sse, SmoothingParams};
use immunet::identify::{identify_sources, IdentifyConfig};
use immunet::netsim::{
    run, run_pairs, MetricsReport, PairOutcome, PairSelection, ResponseMode, SimConfig, SweepAxis,
    SweepSpec, SweepTable,
};
use immunet::traffic::{FlowHistogram, FlowKey, NodeId, PacketRecord, Protocol};

// pinned tolerances and limits
const ENTROPY_TOL: f64 = 1e-9;
const MONOTONE_SLACK: f64 = 1e-12;
const NEAR_ONE_TOL: f64 = 1e-4;
const HW_TOL: f64 = 1e-9;
const LATENCY_OBS: usize = 20;
const PRE_ONSET_FPR_MAX: f64 = 0.05;
const TPR_GAIN_MIN: f64 = 0.05;
const BLOCKED_GAIN_MIN: f64 = 0.05;

struct Report {
    lines: Vec<(usize, bool, bool, String)>,
}

impl Report {
    /// `hard` criteria make the target fail.
    fn record(&mut self, id: usize, hard: bool, pass: bool, took: Duration, limit: Option<Duration>, detail: String) {
        let in_time = limit.is_none_or(|l| took <= l);
        let ok = pass && in_time;
        let timing = match limit {
            Some(l) => format!("{:.2}s (limit {}s)", took.as_secs_f64(), l.as_secs()),
            None => format!("{:.2}s", took.as_secs_f64()),
        };
        let line = format!(
            "{} criterion {id:>2}: {detail}; {timing}",
            if ok { "PASS" } else { "FAIL" }
        );
        println!("{line}");
        self.lines.push((id, hard, ok, line));
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn dist(ps: &[f64]) -> FlowDistribution<usize> {
    FlowDistribution::from_probabilities(ps.iter().copied().enumerate().collect()).unwrap()
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0f64).powi(2)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn criterion_1(r: &mut Report) {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 1..=10u32 {
        let n = 1usize << k;
        let h = shannon_entropy(&dist(&vec![1.0 / n as f64; n]));
        worst = worst.max((h - f64::from(k)).abs());
    }
    let single = shannon_entropy(&dist(&[1.0]));
    r.record(
        1,
        true,
        worst <= ENTROPY_TOL && single == 0.0,
        start.elapsed(),
        secs(1),
        format!("uniform 2^k max error {worst:.2e}, single flow H = {single}"),
    );
}

fn criterion_2(r: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let alphas = [0.0, 0.5, 1.0, 2.0, 3.0];
    let mut violations = 0;
    let mut worst_gap: f64 = 0.0;
    let trials = 200;
    for _ in 0..trials {
        let n = rng.random_range(1..=64);
        let d = dist(&random_probs(&mut rng, n));
        let hs: Vec<f64> = alphas.iter().map(|&a| renyi_entropy(&d, a).unwrap()).collect();
        if hs.windows(2).any(|w| w[1] > w[0] + MONOTONE_SLACK) {
            violations += 1;
        }
        let shannon = shannon_entropy(&d);
        for a in [1.0 - 2e-6, 1.0 + 2e-6, 1.0 - 1e-3, 1.0 + 1e-3] {
            let gap = (renyi_entropy(&d, a).unwrap() - shannon).abs();
            if (a - 1.0f64).abs() < 1e-5 {
                worst_gap = worst_gap.max(gap);
            }
        }
    }
    r.record(
        2,
        true,
        violations == 0 && worst_gap <= NEAR_ONE_TOL,
        start.elapsed(),
        secs(5),
        format!(
            "{trials} distributions, {violations} order violations, near-1 gap {worst_gap:.2e}"
        ),
    );
}

/// Direct textbook recursion with time-indexed arrays.
fn hw_oracle(y: &[f64], l: usize, a: f64, b: f64, g: f64) -> Vec<f64> {
    let n = y.len();
    let m1: f64 = y[..l].iter().sum::<f64>() / l as f64;
    let m2: f64 = y[l..2 * l].iter().sum::<f64>() / l as f64;
    let mut level = vec![0.0; n];
    let mut trend = vec![0.0; n];
    let mut season = vec![0.0; n];
    for t in 0..l {
        season[t] = y[t] - m1;
        season[t + l] = season[t];
    }
    level[2 * l - 1] = m1;
    trend[2 * l - 1] = (m2 - m1) / l as f64;
    let mut forecasts = Vec::with_capacity(n - 2 * l);
    for t in 2 * l..n {
        forecasts.push(level[t - 1] + trend[t - 1] + season[t - l]);
        level[t] = a * (y[t] - season[t - l]) + (1.0 - a) * (level[t - 1] + trend[t - 1]);
        trend[t] = b * (level[t] - level[t - 1]) + (1.0 - b) * trend[t - 1];
        season[t] = g * (y[t] - level[t]) + (1.0 - g) * season[t - l];
    }
    forecasts
}

fn seasonal_series(rng: &mut ChaCha8Rng, n: usize, l: usize) -> Vec<f64> {
    let base = rng.random_range(2.0..8.0);
    let slope = rng.random_range(-0.01..0.01);
    let amp = rng.random_range(0.0..1.0);
    let noise = rng.random_range(0.01..0.5);
    let phase: Vec<f64> = (0..l).map(|_| rng.random_range(-1.0..1.0)).collect();
    (0..n)
        .map(|t| base + slope * t as f64 + amp * phase[t % l] + noise * rng.random_range(-1.0..1.0))
        .collect()
}

fn criterion_3(r: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let l = [4, 7, 12][rng.random_range(0..3)];
        let y = seasonal_series(&mut rng, 200, l);
        let p = SmoothingParams::new(
            rng.random_range(0.01..0.99),
            rng.random_range(0.01..0.99),
            rng.random_range(0.01..0.99),
        )
        .unwrap();
        let oracle = hw_oracle(&y, l, p.alpha, p.beta, p.gamma);
        let mut state = init_state(&y, p, l).unwrap();
        for (i, &h) in y[2 * l..].iter().enumerate() {
            worst = worst.max((state.forecast_next().value - oracle[i]).abs());
            state.update_in_place(h);
        }
        let sse: f64 = oracle.iter().zip(&y[2 * l..]).map(|(f, h)| (h - f) * (h - f)).sum();
        worst = worst.max((one_step_sse(&y, p, l).unwrap() - sse).abs() / sse.max(1.0));
    }
    let mut grid_mismatch = 0;
    for _ in 0..10 {
        let l = 12;
        let y = seasonal_series(&mut rng, 200, l);
        let mut best: Option<((f64, f64, f64), f64)> = None;
        for a in grid_values() {
            for b in grid_values() {
                for g in grid_values() {
                    let f = hw_oracle(&y, l, a, b, g);
                    let sse: f64 = f.iter().zip(&y[2 * l..]).map(|(f, h)| (h - f) * (h - f)).sum();
                    if best.is_none_or(|(_, s)| sse < s) {
                        best = Some(((a, b, g), sse));
                    }
                }
            }
        }
        let ((a, b, g), _) = best.unwrap();
        let fit = fit_parameters(&y, l).unwrap().params;
        if (fit.alpha, fit.beta, fit.gamma) != (a, b, g) {
            grid_mismatch += 1;
        }
    }
    r.record(
        3,
        true,
        worst <= HW_TOL && grid_mismatch == 0,
        start.elapsed(),
        secs(120),
        format!("100 series max deviation {worst:.2e}, grid fit mismatches {grid_mismatch}/10"),
    );
}

/// Packets of one observation drawn from `weights` over `flows`.
fn draw(rng: &mut ChaCha8Rng, flows: &[(NodeId, NodeId, u16)], weights: &WeightedIndex<f64>, m: usize, out: &mut Vec<PacketRecord>) {
    for _ in 0..m {
        let (s, d, p) = &flows[weights.sample(rng)];
        out.push(PacketRecord {
            seq: out.len() as u64,
            src: s.clone(),
            dst: d.clone(),
            dport: *p,
            proto: Protocol::Tcp,
            size: 64,
        });
    }
}

fn legit_flows(n: usize) -> Vec<(NodeId, NodeId, u16)> {
    let ports = [80, 443, 21, 22, 53];
    (0..n)
        .map(|i| {
            (
                NodeId::new(format!("10.0.{}.{}", i / 250, i % 250 + 1)),
                NodeId::new(format!("192.168.1.{}", i % 20 + 1)),
                ports[i % ports.len()],
            )
        })
        .collect()
}

fn criterion_4(r: &mut Report) {
    let start = Instant::now();
    const M: usize = 2000;
    const ONSET: usize = 60;
    const END: usize = 100;
    const TOTAL: usize = 140;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let flows = legit_flows(400);
    let zipf = WeightedIndex::new((0..flows.len()).map(|i| 1.0 / (i as f64 + 1.0).powf(0.9))).unwrap();
    let attacker = (NodeId::new("203.0.113.7"), NodeId::new("192.168.1.1"), 80u16);
    let mut records = Vec::with_capacity(TOTAL * M);
    for t in 0..TOTAL {
        let mut obs = Vec::with_capacity(M);
        if (ONSET..END).contains(&t) {
            draw(&mut rng, &flows, &zipf, M / 2, &mut obs);
            draw(&mut rng, std::slice::from_ref(&attacker), &WeightedIndex::new([1.0]).unwrap(), M / 2, &mut obs);
            obs.shuffle(&mut rng);
        } else {
            draw(&mut rng, &flows, &zipf, M, &mut obs);
        }
        for mut p in obs {
            p.seq = records.len() as u64;
            records.push(p);
        }
    }
    let a = analyze_records(&records, &AnalyzeConfig::new(M)).unwrap();
    let alerted: Vec<usize> = a.alerts.iter().map(|x| x.verdict.t).collect();
    let pre: Vec<_> = a.verdicts.iter().filter(|v| v.t < ONSET).collect();
    let pre_alerts = pre.iter().filter(|v| v.anomalous).count();
    let pre_fpr = pre_alerts as f64 / pre.len().max(1) as f64;
    let onset = alerted.iter().find(|&&t| t >= ONSET).copied();
    let after_end = alerted.iter().find(|&&t| t >= END).copied();
    let onset_ok = onset.is_some_and(|t| t <= ONSET + LATENCY_OBS);
    let end_ok = after_end.is_some_and(|t| t <= END + LATENCY_OBS);
    let named = a
        .alerts
        .iter()
        .find(|x| x.verdict.t >= ONSET)
        .is_some_and(|x| x.blockable == vec![FlowKey::new("203.0.113.7", "192.168.1.1", 80)]);
    r.record(
        4,
        false,
        onset_ok && end_ok && pre_fpr <= PRE_ONSET_FPR_MAX && !pre.is_empty(),
        start.elapsed(),
        secs(10),
        format!(
            "first alert at or after onset {ONSET}: {onset:?}; first alert at or after end {END}: {after_end:?}; \
             pre-onset FPR {pre_alerts}/{} = {pre_fpr:.3}; attacker named at onset: {named}",
            pre.len()
        ),
    );
}

fn criterion_5(r: &mut Report) {
    let start = Instant::now();
    const M: usize = 2000;
    const OBS: usize = 300;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // heavy hitters with i.i.d. lognormal jitter, a medium band and a long tail
    let flows = legit_flows(560);
    let jitter = LogNormal::new(0.0, 0.25).unwrap();
    let heavy = [40.0, 30.0, 25.0, 20.0, 15.0];
    let mut records = Vec::with_capacity(OBS * M);
    for _ in 0..OBS {
        let w: Vec<f64> = (0..flows.len())
            .map(|i| match i {
                0..5 => heavy[i] * jitter.sample(&mut rng),
                5..55 => 3.0,
                _ => 10.0 / (i as f64 - 54.0),
            })
            .collect();
        draw(&mut rng, &flows, &WeightedIndex::new(w).unwrap(), M, &mut records);
    }
    let mut fprs = Vec::new();
    for alpha in [1.0, 2.0, 3.0, 4.0] {
        let cfg = AnalyzeConfig {
            renyi_alpha: alpha,
            ..AnalyzeConfig::new(M)
        };
        let a = analyze_records(&records, &cfg).unwrap();
        fprs.push(a.alerts.len() as f64 / a.verdicts.len() as f64);
    }
    let monotone = fprs.windows(2).all(|w| w[1] >= w[0]);
    r.record(
        5,
        false,
        monotone,
        start.elapsed(),
        None,
        format!(
            "FPR at alpha 1..4 = {}; magnitude above 20% is not a gate",
            fprs.iter().map(|f| format!("{f:.3}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

/// All set partitions of `0..n` as block labels (restricted growth strings).
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            cur.push(b);
            rec(i + 1, n, cur, max.max(b), out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(1, n, &mut vec![0], 0, &mut out);
    }
    out
}

/// Brute-force counterpart of `identify_sources`: exact best partition for
/// every `k`, the same elbow rule, and the top-mean block.
fn identify_oracle(ps: &[f64], cfg: &IdentifyConfig) -> Vec<usize> {
    let n = ps.len();
    let mut distinct = ps.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let limit = cfg.k_max.min(distinct.len());
    let mut best: BTreeMap<usize, (f64, Vec<usize>)> = BTreeMap::new();
    for labels in partitions(n) {
        let k = labels.iter().max().unwrap() + 1;
        if k > limit {
            continue;
        }
        let mut sum = vec![0.0; k];
        let mut cnt = vec![0.0; k];
        for (i, &b) in labels.iter().enumerate() {
            sum[b] += ps[i];
            cnt[b] += 1.0;
        }
        let sse: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &b)| (ps[i] - sum[b] / cnt[b]).powi(2))
            .sum();
        if best.get(&k).is_none_or(|(s, _)| sse < *s) {
            best.insert(k, (sse, labels));
        }
    }
    let sse1 = best[&1].0;
    let mut chosen = limit;
    for k in 1..=limit {
        // identical values give an exact-zero spread; tiny float residue counts as zero
        if best[&k].0 <= 1e-15 {
            chosen = k;
            break;
        }
        if k > 1 && (best[&(k - 1)].0 - best[&k].0) / sse1 < cfg.elbow_threshold {
            chosen = k - 1;
            break;
        }
    }
    let labels = &best[&chosen].1;
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); chosen];
    for (i, &b) in labels.iter().enumerate() {
        blocks[b].push(i);
    }
    let mean = |b: &Vec<usize>| b.iter().map(|&i| ps[i]).sum::<f64>() / b.len() as f64;
    blocks
        .into_iter()
        .max_by(|a, b| {
            mean(a)
                .total_cmp(&mean(b))
                .then(a.len().cmp(&b.len()))
                .then(b[0].cmp(&a[0]))
        })
        .unwrap()
}

fn criterion_6(r: &mut Report) {
    let start = Instant::now();
    let cfg = IdentifyConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=8);
        let ps = random_probs(&mut rng, n);
        let flows: Vec<(usize, f64)> = ps.iter().copied().enumerate().collect();
        let got = identify_sources(&flows, 0, &cfg).unwrap().flows;
        if got != identify_oracle(&ps, &cfg) {
            mismatches += 1;
        }
    }
    // background flows within a factor of two of each other; a second
    // flow near the flood's size is a two-source event and is only counted
    let planted = |rng: &mut ChaCha8Rng, even: bool| {
        let n = rng.random_range(2..=8);
        let big = rng.random_range(0.5..0.95);
        let w: Vec<f64> = (1..n)
            .map(|_| if even { rng.random_range(0.5..1.0) } else { rng.random_range(0.01..1.0f64).powi(2) })
            .collect();
        let total: f64 = w.iter().sum();
        let at = rng.random_range(0..n);
        let mut ps: Vec<f64> = w.iter().map(|x| x / total * (1.0 - big)).collect();
        ps.insert(at, big);
        let hist = FlowHistogram::from_counts(ps.iter().enumerate().map(|(i, p)| (i, (p * 1e6).round() as u64)));
        let d = flow_probabilities(&hist).unwrap();
        identify_sources(d.as_slice(), 0, &cfg).unwrap().flows == vec![at]
    };
    let planted_misses = (0..50).filter(|_| !planted(&mut rng, true)).count();
    let skewed_misses = (0..50).filter(|_| !planted(&mut rng, false)).count();
    r.record(
        6,
        true,
        mismatches == 0 && planted_misses == 0,
        start.elapsed(),
        secs(30),
        format!(
            "oracle mismatches {mismatches}/50, planted-flood misses {planted_misses}/50 \
             (skewed backgrounds, not gated: {skewed_misses}/50)"
        ),
    );
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> f64 {
    let v: Vec<f64> = values.flatten().collect();
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

fn gain(table: &SweepTable, key: &str, f: impl Fn(&immunet::netsim::ModeStats) -> Option<f64>) -> Option<f64> {
    let row = table.rows.iter().find(|r| r.key == key)?;
    Some(f(&row.adaptive)? - f(&row.innate)?)
}

fn criteria_7_to_9(r: &mut Report) {
    let start = Instant::now();
    let grid = vec![0.30, 0.35, 0.40];
    let spec = SweepSpec {
        base: SimConfig::default(),
        axis: SweepAxis::Location,
        grid: grid.clone(),
        networks: 20,
        node_range: Some((8, 40)),
        pairs: PairSelection::All,
    };
    let outcomes: Vec<PairOutcome> = run_pairs(&spec).unwrap();
    let took = start.elapsed();

    let tpr = |m: ResponseMode| mean(outcomes.iter().map(|o| o.report(m).tpr()));
    let (ti, ta) = (tpr(ResponseMode::Innate), tpr(ResponseMode::Adaptive));
    let location = SweepTable::from_outcomes(SweepAxis::Location, &grid, &outcomes);
    let loc_gain = |k: &str| gain(&location, k, |s| s.tpr.value());
    let (g0, g2, g4) = (loc_gain("0.0-0.2"), loc_gain("0.4-0.6"), loc_gain("0.8-1.0"));
    let mid_ok = match (g0, g2, g4) {
        (Some(a), Some(m), Some(b)) => m > a && m > b,
        _ => false,
    };
    let fmt = |g: Option<f64>| g.map_or("n/a".to_string(), |x| format!("{x:+.3}"));
    r.record(
        7,
        false,
        ta - ti >= TPR_GAIN_MIN && mid_ok,
        took,
        secs(15 * 60),
        format!(
            "{} paired runs; mean TPR innate {ti:.3} adaptive {ta:.3} (gain {:+.3}); \
             location gain ends {} / {} vs mid {}",
            outcomes.len(),
            ta - ti,
            fmt(g0),
            fmt(g4),
            fmt(g2)
        ),
    );

    let pathlen = SweepTable::from_outcomes(SweepAxis::PathLength, &grid, &outcomes);
    let mut worse_bins = Vec::new();
    for row in &pathlen.rows {
        if let (Some(a), Some(i)) = (row.adaptive.blocked.value(), row.innate.blocked.value()) {
            if a < i {
                worse_bins.push(row.key.clone());
            }
        }
    }
    let blocked = |m: ResponseMode| {
        mean(outcomes.iter().map(|o| o.report(m).blocked().map(|b| f64::from(u8::from(b)))))
    };
    let (bi, ba) = (blocked(ResponseMode::Innate), blocked(ResponseMode::Adaptive));
    r.record(
        8,
        false,
        worse_bins.is_empty() && ba >= bi + BLOCKED_GAIN_MIN,
        Duration::ZERO,
        None,
        format!(
            "blocked innate {bi:.3} adaptive {ba:.3} (gain {:+.3}); path-length bins where adaptive is lower: {:?}",
            ba - bi,
            worse_bins
        ),
    );

    // Each world marks an adaptive sensor that still holds an activation
    // against the flood when it processes its Q-th window after the flood
    // has drained. A sensor's restriction returns to the default with its
    // last activation, so zero marks also means every K is back at default.
    let runs: Vec<&MetricsReport> = outcomes.iter().flat_map(|o| [&o.innate, &o.adaptive]).collect();
    let violating = runs.iter().filter(|m| m.quiescence_violations > 0).count();
    let unresolved = runs.iter().filter(|m| m.unresolved > 0).count();
    let sensors: u64 = runs.iter().map(|m| m.quiescence_violations).sum();
    r.record(
        9,
        false,
        violating == 0 && unresolved == 0,
        Duration::ZERO,
        None,
        format!(
            "{} runs; runs with a D_A still active after Q windows: {violating} ({sensors} sensors); \
             runs ending undecided: {unresolved}",
            runs.len()
        ),
    );
}

fn criterion_10(r: &mut Report) {
    let start = Instant::now();
    let cfg = SimConfig {
        nodes: 16,
        ..Default::default()
    };
    let (e1, m1) = run(&cfg).unwrap();
    let (e2, m2) = run(&cfg).unwrap();
    let log = |e: &[immunet::netsim::SimEvent]| e.iter().map(|x| format!("{x}\n")).collect::<String>();
    let single = log(&e1) == log(&e2) && m1.to_csv() == m2.to_csv() && !e1.is_empty();
    let spec = SweepSpec {
        base: SimConfig::default(),
        axis: SweepAxis::Power,
        grid: vec![0.3, 0.6],
        networks: 3,
        node_range: Some((8, 14)),
        pairs: PairSelection::Sample(4),
    };
    let a = run_pairs(&spec).unwrap();
    let b = run_pairs(&spec).unwrap();
    let csv = |o: &[PairOutcome]| SweepTable::from_outcomes(spec.axis, &spec.grid, o).to_csv();
    let rows = |o: &[PairOutcome]| {
        o.iter()
            .flat_map(|x| [x.innate.row(), x.adaptive.row()])
            .collect::<Vec<_>>()
            .join("\n")
    };
    let swept = csv(&a) == csv(&b) && rows(&a) == rows(&b);
    let other = run(&SimConfig { seed: 2, ..cfg.clone() }).unwrap();
    let seed_matters = log(&other.0) != log(&e1);
    r.record(
        10,
        true,
        single && swept && seed_matters,
        start.elapsed(),
        secs(60),
        format!(
            "repeat run identical: {single}; repeat sweep identical: {swept}; another seed differs: {seed_matters}"
        ),
    );
}

fn main() -> ExitCode {
    // optional criterion numbers on the command line select a subset
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |ids: &[usize]| only.is_empty() || ids.iter().any(|i| only.contains(i));
    let mut r = Report { lines: Vec::new() };
    let ordered: [(&[usize], fn(&mut Report)); 8] = [
        (&[1], criterion_1),
        (&[2], criterion_2),
        (&[3], criterion_3),
        (&[4], criterion_4),
        (&[5], criterion_5),
        (&[6], criterion_6),
        (&[7, 8, 9], criteria_7_to_9),
        (&[10], criterion_10),
    ];
    for (ids, f) in ordered {
        if want(ids) {
            f(&mut r);
        }
    }
    if want(&[11]) {
        r.record(
            11,
            false,
            true,
            Duration::ZERO,
            None,
            "external dataset figures are reference values only; no gate".into(),
        );
    }
    let passed = r.lines.iter().filter(|l| l.2).count();
    let failed: Vec<usize> = r.lines.iter().filter(|l| !l.2).map(|l| l.0).collect();
    println!("acceptance: {passed}/{} PASS; failing: {failed:?}", r.lines.len());
    let hard_failed = r.lines.iter().any(|l| l.1 && !l.2);
    if hard_failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
