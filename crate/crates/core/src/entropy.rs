//! Flow probabilities and Shannon / Rényi entropy, in bits.

use crate::error::{Error, Result};
use crate::traffic::{flow_histogram, FlowHistogram, FlowKey, Observation};

/// Orders within this distance of 1 are evaluated with the Shannon formula.
pub const ALPHA_TOLERANCE: f64 = 1e-6;

/// Relative packet frequency per flow. Keys are sorted, every probability is
/// strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowDistribution<K = FlowKey> {
    entries: Vec<(K, f64)>,
}

impl<K: Ord + Clone> FlowDistribution<K> {
    /// Builds a distribution from `(key, p)` pairs that already sum to one.
    pub fn from_probabilities(mut entries: Vec<(K, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::input("distribution has no flows"));
        }
        if entries.iter().any(|(_, p)| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::input("probabilities must be positive and finite"));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::input("duplicate flow key"));
        }
        let sum: f64 = entries.iter().map(|(_, p)| p).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(FlowDistribution { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&K, f64)> {
        self.entries.iter().map(|(k, p)| (k, *p))
    }

    pub fn as_slice(&self) -> &[(K, f64)] {
        &self.entries
    }

    pub fn probabilities(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, p)| *p)
    }

    pub fn get(&self, key: &K) -> f64 {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(key))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }
}

/// `p_i = a_i / m` for every flow in the histogram.
pub fn flow_probabilities<K: Ord + Clone>(hist: &FlowHistogram<K>) -> Result<FlowDistribution<K>> {
    if hist.is_empty() {
        return Err(Error::input("empty histogram"));
    }
    let m = hist.total() as f64;
    Ok(FlowDistribution {
        entries: hist.iter().map(|(k, c)| (k.clone(), c as f64 / m)).collect(),
    })
}

fn ascending(mut ps: Vec<f64>) -> Vec<f64> {
    ps.sort_by(f64::total_cmp);
    ps
}

fn clamp_bits(h: f64, n: usize) -> f64 {
    let max = (n as f64).log2();
    let h = h.clamp(0.0, max);
    // -0.0 is an artifact of the negated sum on a single flow
    if h == 0.0 {
        0.0
    } else {
        h
    }
}

fn shannon_of(ps: &[f64]) -> f64 {
    let s: f64 = ps.iter().map(|&p| p * p.log2()).sum();
    clamp_bits(-s, ps.len())
}

fn renyi_of(ps: &[f64], alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::param(format!("Renyi order must be finite and >= 0, got {alpha}")));
    }
    if (alpha - 1.0).abs() <= ALPHA_TOLERANCE {
        return Ok(shannon_of(ps));
    }
    let s: f64 = ps.iter().map(|&p| p.powf(alpha)).sum();
    Ok(clamp_bits(s.log2() / (1.0 - alpha), ps.len()))
}

pub fn shannon_entropy<K: Ord + Clone>(dist: &FlowDistribution<K>) -> f64 {
    shannon_of(&ascending(dist.probabilities().collect()))
}

/// Rényi entropy of order `alpha`. Orders within [`ALPHA_TOLERANCE`] of 1
/// return the Shannon value.
pub fn renyi_entropy<K: Ord + Clone>(dist: &FlowDistribution<K>, alpha: f64) -> Result<f64> {
    renyi_of(&ascending(dist.probabilities().collect()), alpha)
}

/// Entropy straight from packet counts, skipping the keyed distribution.
pub fn entropy_from_counts(counts: &[u64], alpha: f64) -> Result<f64> {
    let m: u64 = counts.iter().sum();
    if m == 0 {
        return Err(Error::input("no packets"));
    }
    let mf = m as f64;
    let ps: Vec<f64> = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 / mf)
        .collect();
    renyi_of(&ascending(ps), alpha)
}

/// Entropy of one histogram at order `alpha`.
pub fn histogram_entropy<K: Ord>(hist: &FlowHistogram<K>, alpha: f64) -> Result<f64> {
    let counts: Vec<u64> = hist.counts().collect();
    entropy_from_counts(&counts, alpha)
}

/// Divides by `log2 n`; a single-flow distribution maps to 0.
pub fn normalized(value: f64, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        value / (n as f64).log2()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyPoint {
    pub t: usize,
    pub value: f64,
    pub alpha: f64,
}

/// One entropy sample per observation, index-aligned with the input.
pub fn entropy_series(observations: &[Observation], alpha: f64) -> Result<Vec<EntropyPoint>> {
    observations
        .iter()
        .map(|obs| {
            let wrap = |e: Error| Error::AtObservation {
                index: obs.index,
                source: Box::new(e),
            };
            let hist = flow_histogram(obs).map_err(wrap)?;
            let value = histogram_entropy(&hist, alpha).map_err(wrap)?;
            Ok(EntropyPoint {
                t: obs.index,
                value,
                alpha,
            })
        })
        .collect()
}
