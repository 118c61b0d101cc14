//! One-dimensional k-means over flow probabilities, elbow selection of `k`,
//! and extraction of the high-probability cluster as the suspect set.
//!
//! Lloyd iteration is seeded from the optimal contiguous partition of the
//! sorted distinct values (dynamic programming), so the result for a given
//! `k` is the global SSE minimum rather than a seed-dependent local one.

use crate::error::{Error, Result};

pub const DEFAULT_K_MAX: usize = 10;
pub const DEFAULT_ELBOW_THRESHOLD: f64 = 0.10;
pub const DEFAULT_MAX_ITERS: usize = 100;
/// Share of all flows above which the suspect cluster is considered too broad.
pub const DEGENERATE_SHARE: f64 = 0.5;
const GUARD_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentifyConfig {
    pub k_max: usize,
    pub elbow_threshold: f64,
    pub max_iters: usize,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            k_max: DEFAULT_K_MAX,
            elbow_threshold: DEFAULT_ELBOW_THRESHOLD,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterModel<K> {
    pub k: usize,
    /// Ascending.
    pub centroids: Vec<f64>,
    /// `(key, cluster index)` in input order.
    pub assignment: Vec<(K, usize)>,
    pub sse: f64,
}

impl<K: Clone> ClusterModel<K> {
    pub fn members(&self, cluster: usize) -> impl Iterator<Item = &K> {
        self.assignment
            .iter()
            .filter(move |(_, c)| *c == cluster)
            .map(|(k, _)| k)
    }

    pub fn cluster_size(&self, cluster: usize) -> usize {
        self.assignment.iter().filter(|(_, c)| *c == cluster).count()
    }
}

/// Distinct values in ascending order with multiplicities.
fn distinct_weighted(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<(f64, f64)> = Vec::new();
    for v in sorted {
        match out.last_mut() {
            Some((last, w)) if *last == v => *w += 1.0,
            _ => out.push((v, 1.0)),
        }
    }
    out
}

/// Optimal split of weighted sorted points into `k` contiguous runs.
/// Returns run means. Ties prefer the smallest split position.
fn dp_seed(points: &[(f64, f64)], k: usize) -> Vec<f64> {
    let n = points.len();
    let mut w = vec![0.0; n + 1];
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, &(v, wt)) in points.iter().enumerate() {
        w[i + 1] = w[i] + wt;
        s1[i + 1] = s1[i] + wt * v;
        s2[i + 1] = s2[i] + wt * v * v;
    }
    // cost of points[i..j]
    let cost = |i: usize, j: usize| -> f64 {
        let ww = w[j] - w[i];
        let a = s1[j] - s1[i];
        (s2[j] - s2[i] - a * a / ww).max(0.0)
    };
    // best[c][j]: min cost of first j points in c+1 runs; split[c][j]: start of last run
    let mut best = vec![vec![f64::INFINITY; n + 1]; k];
    let mut split = vec![vec![0usize; n + 1]; k];
    for j in 1..=n {
        best[0][j] = cost(0, j);
    }
    for c in 1..k {
        for j in (c + 1)..=n {
            for i in c..j {
                let v = best[c - 1][i] + cost(i, j);
                if v < best[c][j] {
                    best[c][j] = v;
                    split[c][j] = i;
                }
            }
        }
    }
    let mut bounds = vec![n];
    let mut j = n;
    for c in (1..k).rev() {
        j = split[c][j];
        bounds.push(j);
    }
    bounds.push(0);
    bounds.reverse();
    bounds
        .windows(2)
        .map(|b| {
            if b[1] - b[0] == 1 {
                points[b[0]].0
            } else {
                (s1[b[1]] - s1[b[0]]) / (w[b[1]] - w[b[0]])
            }
        })
        .collect()
}

fn nearest(centroids: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &c) in centroids.iter().enumerate() {
        let d = (v - c).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn sse_of(values: &[f64], assign: &[usize], centroids: &[f64]) -> f64 {
    values
        .iter()
        .zip(assign)
        .map(|(v, &a)| (v - centroids[a]) * (v - centroids[a]))
        .sum()
}

/// Lloyd's algorithm on `values` starting from the optimal contiguous
/// partition. Returns the assignment and the centroids it is nearest to.
fn lloyd(values: &[f64], mut centroids: Vec<f64>, max_iters: usize) -> (Vec<usize>, Vec<f64>) {
    let k = centroids.len();
    let mut assign: Vec<usize> = values.iter().map(|&v| nearest(&centroids, v)).collect();
    for _ in 0..max_iters {
        let mut sum = vec![0.0; k];
        let mut cnt = vec![0usize; k];
        let mut lo = vec![f64::INFINITY; k];
        let mut hi = vec![f64::NEG_INFINITY; k];
        for (&v, &a) in values.iter().zip(&assign) {
            sum[a] += v;
            cnt[a] += 1;
            lo[a] = lo[a].min(v);
            hi[a] = hi[a].max(v);
        }
        for c in 0..k {
            if cnt[c] > 0 {
                // a run of equal values keeps its exact value as centroid
                centroids[c] = if lo[c] == hi[c] {
                    lo[c]
                } else {
                    sum[c] / cnt[c] as f64
                };
            }
        }
        for c in 0..k {
            if cnt[c] == 0 {
                // reseed at the point farthest from its centroid, first on ties
                let (far, _) = values.iter().enumerate().fold((0, -1.0), |acc, (i, &v)| {
                    let d = (v - centroids[assign[i]]).abs();
                    if d > acc.1 {
                        (i, d)
                    } else {
                        acc
                    }
                });
                centroids[c] = values[far];
            }
        }
        let next: Vec<usize> = values.iter().map(|&v| nearest(&centroids, v)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    // relabel so centroid order is ascending
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&c| centroids[c]).collect();
    let assign = values.iter().map(|&v| nearest(&sorted, v)).collect();
    (assign, sorted)
}

/// k-means on the probability of each flow.
pub fn kmeans_1d<K: Clone>(values: &[(K, f64)], k: usize, max_iters: usize) -> Result<ClusterModel<K>> {
    if k == 0 {
        return Err(Error::param("k must be at least 1"));
    }
    let ps: Vec<f64> = values.iter().map(|(_, p)| *p).collect();
    if ps.iter().any(|p| !p.is_finite()) {
        return Err(Error::input("values must be finite"));
    }
    let points = distinct_weighted(&ps);
    if k > points.len() {
        return Err(Error::param(format!(
            "k = {k} exceeds the {} distinct values",
            points.len()
        )));
    }
    let seed = dp_seed(&points, k);
    let (assign, centroids) = lloyd(&ps, seed, max_iters);
    let sse = sse_of(&ps, &assign, &centroids);
    Ok(ClusterModel {
        k,
        centroids,
        assignment: values
            .iter()
            .zip(assign)
            .map(|((key, _), a)| (key.clone(), a))
            .collect(),
        sse,
    })
}

/// Increases `k` until the SSE gain of one more cluster, as a share of the
/// single-cluster SSE, drops below `threshold`, or the SSE reaches zero. The
/// scan stops at `k_max` or the distinct value count.
pub fn elbow_select<K: Clone>(
    values: &[(K, f64)],
    k_max: usize,
    threshold: f64,
    max_iters: usize,
) -> Result<ClusterModel<K>> {
    if values.is_empty() {
        return Err(Error::input("no values to cluster"));
    }
    if k_max == 0 {
        return Err(Error::param("k_max must be at least 1"));
    }
    let ps: Vec<f64> = values.iter().map(|(_, p)| *p).collect();
    let limit = k_max.min(distinct_weighted(&ps).len());
    let mut prev: Option<ClusterModel<K>> = None;
    let mut scatter = 0.0;
    for k in 1..=limit {
        let model = kmeans_1d(values, k, max_iters)?;
        if model.sse == 0.0 {
            return Ok(model);
        }
        match prev.take() {
            None => scatter = model.sse,
            Some(p) => {
                if (p.sse - model.sse) / scatter < threshold {
                    return Ok(p);
                }
            }
        }
        prev = Some(model);
    }
    Ok(prev.expect("at least one k scanned"))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuspectSet<K> {
    /// Sorted.
    pub flows: Vec<K>,
    pub trigger_t: usize,
    pub centroid_p: f64,
    /// Share of all flows that fell in the suspect cluster.
    pub cluster_share: f64,
}

impl<K> SuspectSet<K> {
    pub fn is_degenerate(&self) -> bool {
        self.cluster_share > DEGENERATE_SHARE
    }
}

/// Members of the cluster with the greatest centroid. Centroid ties go to
/// the larger cluster, then to the cluster holding the smallest key.
pub fn identify_sources<K: Clone + Ord>(
    dist: &[(K, f64)],
    t: usize,
    cfg: &IdentifyConfig,
) -> Result<SuspectSet<K>> {
    let model = elbow_select(dist, cfg.k_max, cfg.elbow_threshold, cfg.max_iters)?;
    let mut members: Vec<Vec<K>> = vec![Vec::new(); model.k];
    for (key, c) in &model.assignment {
        members[*c].push(key.clone());
    }
    for m in &mut members {
        m.sort();
    }
    let pick = (0..model.k)
        .filter(|&c| !members[c].is_empty())
        .max_by(|&a, &b| {
            model.centroids[a]
                .total_cmp(&model.centroids[b])
                .then(members[a].len().cmp(&members[b].len()))
                .then(members[b][0].cmp(&members[a][0]))
        })
        .expect("non-empty input has a non-empty cluster");
    let flows = std::mem::take(&mut members[pick]);
    Ok(SuspectSet {
        cluster_share: flows.len() as f64 / dist.len() as f64,
        flows,
        trigger_t: t,
        centroid_p: model.centroids[pick],
    })
}

/// Flows to block for `suspects`. A degenerate suspect cluster is narrowed
/// to the flows strictly above its centroid; an empty result means the
/// identification is inconclusive.
pub fn blockable<K: Clone + Ord>(suspects: &SuspectSet<K>, dist: &[(K, f64)]) -> Vec<K> {
    if !suspects.is_degenerate() {
        return suspects.flows.clone();
    }
    let cut = suspects.centroid_p + GUARD_EPS;
    let mut out: Vec<K> = dist
        .iter()
        .filter(|(k, p)| *p > cut && suspects.flows.binary_search(k).is_ok())
        .map(|(k, _)| k.clone())
        .collect();
    out.sort();
    out
}
