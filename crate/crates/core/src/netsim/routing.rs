//! Shortest-path forwarding around blocking nodes.

use std::collections::HashMap;
use std::sync::Arc;

use super::topology::Topology;
use super::{flow_hash, SimFlow};

/// Next-hop oracle. Distance tables toward a destination are computed in
/// the graph with the flow's blocking nodes removed and cached by
/// `(destination, blockers)`.
#[derive(Clone, Debug)]
pub struct Router {
    topo: Arc<Topology>,
    /// Unblocked distances to every destination.
    base: Arc<Vec<Vec<u32>>>,
    /// Per destination, distance tables keyed by the sorted blocker list.
    cache: HashMap<u32, HashMap<Vec<u32>, Arc<Vec<u32>>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Hop {
    Next(u32),
    NoPath,
}

impl Router {
    pub fn new(topo: Arc<Topology>) -> Self {
        let base = Arc::new(topo.distances());
        Router {
            topo,
            base,
            cache: HashMap::new(),
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    /// Unblocked hop distance.
    pub fn distance(&self, a: u32, b: u32) -> u32 {
        self.base[b as usize][a as usize]
    }

    fn table(&mut self, dst: u32, blockers: &[u32]) -> Arc<Vec<u32>> {
        let per_dst = self.cache.entry(dst).or_default();
        if let Some(t) = per_dst.get(blockers) {
            return Arc::clone(t);
        }
        let n = self.topo.node_count();
        let mut dist = vec![u32::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[dst as usize] = 0;
        queue.push_back(dst);
        while let Some(u) = queue.pop_front() {
            for &v in self.topo.neighbors(u) {
                if dist[v as usize] == u32::MAX && blockers.binary_search(&v).is_err() {
                    dist[v as usize] = dist[u as usize] + 1;
                    queue.push_back(v);
                }
            }
        }
        let t = Arc::new(dist);
        per_dst.insert(blockers.to_vec(), Arc::clone(&t));
        t
    }

    /// Next hop for `flow` at `at`, avoiding the sorted `blockers` (which
    /// must not contain `at` or the destination). Equal-cost candidates are
    /// chosen by a hash of the flow and the current node.
    pub fn next_hop(&mut self, at: u32, flow: &SimFlow, blockers: &[u32]) -> Hop {
        let dst = flow.dst;
        debug_assert_ne!(at, dst);
        let pick = |dist: &[u32], topo: &Topology| -> Hop {
            let d = dist[at as usize];
            if d == u32::MAX {
                return Hop::NoPath;
            }
            let closer = |v: &&u32| dist[**v as usize] == d - 1;
            let count = topo.neighbors(at).iter().filter(closer).count();
            let pick = (flow_hash(flow, at) % count as u64) as usize;
            Hop::Next(*topo.neighbors(at).iter().filter(closer).nth(pick).expect("a closer neighbor"))
        };
        if blockers.is_empty() {
            return pick(&self.base[dst as usize], &self.topo);
        }
        let table = self.table(dst, blockers);
        pick(&table, &self.topo)
    }
}
