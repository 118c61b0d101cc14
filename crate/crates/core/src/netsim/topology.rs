//! Random tree-plus-cycles topologies.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    n: usize,
    /// Sorted `(a, b)` with `a < b`.
    edges: Vec<(u32, u32)>,
    /// Sorted neighbor lists.
    adj: Vec<Vec<u32>>,
    pub capacity: u32,
    pub branching: usize,
    pub cyclic: f64,
}

/// `n00`, `n01`, ...; width grows with the node count.
pub fn node_name(id: u32, n: usize) -> String {
    let width = n.saturating_sub(1).max(1).to_string().len().max(2);
    format!("n{id:0width$}")
}

impl Topology {
    pub fn from_edges(n: usize, edges: &[(u32, u32)], capacity: u32) -> Result<Self> {
        let mut norm: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a == b || a as usize >= n || b as usize >= n {
                return Err(Error::config(format!("bad edge ({a}, {b})")));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &norm {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        let t = Topology {
            n,
            edges: norm,
            adj,
            capacity,
            branching: 0,
            cyclic: 0.0,
        };
        if !t.is_connected() {
            return Err(Error::config("topology is not connected"));
        }
        Ok(t)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adj[v as usize]
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adj[v as usize].len()
    }

    pub fn has_edge(&self, a: u32, b: u32) -> bool {
        self.adj[a as usize].binary_search(&b).is_ok()
    }

    pub fn name(&self, v: u32) -> String {
        node_name(v, self.n)
    }

    /// Hop distances from `src`; unreachable nodes get `u32::MAX`.
    pub fn bfs(&self, src: u32) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n];
        let mut queue = std::collections::VecDeque::new();
        dist[src as usize] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u as usize] {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = dist[u as usize] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.bfs(0).iter().all(|&d| d != u32::MAX)
    }

    /// All-pairs hop distances.
    pub fn distances(&self) -> Vec<Vec<u32>> {
        (0..self.n as u32).map(|v| self.bfs(v)).collect()
    }

    /// Mean hop count over ordered pairs of distinct nodes.
    pub fn mean_hops(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let total: u64 = self
            .distances()
            .iter()
            .flat_map(|row| row.iter().map(|&d| u64::from(d)))
            .sum();
        total as f64 / (self.n * (self.n - 1)) as f64
    }
}

/// Random tree in which every node has at most `b` children, plus
/// `⌈c·n⌉` extra edges chosen uniformly among the non-edges.
pub fn generate_topology(n: usize, b: usize, c: f64, capacity: u32, seed: u64) -> Result<Topology> {
    if n < 3 {
        return Err(Error::config(format!("need at least 3 nodes, got {n}")));
    }
    if b == 0 || b >= n {
        return Err(Error::config(format!(
            "branching must lie in 1..{n} for {n} nodes, got {b}"
        )));
    }
    if !(c.is_finite() && c >= 0.0) {
        return Err(Error::config(format!("cyclic component must be >= 0, got {c}")));
    }
    if capacity == 0 {
        return Err(Error::config("edge capacity must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut children = vec![0usize; n];
    let mut open: Vec<u32> = vec![0];
    let mut edges = Vec::with_capacity(n - 1);
    for v in 1..n as u32 {
        let &parent = open.choose(&mut rng).expect("a tree always has an open node");
        edges.push((parent, v));
        children[parent as usize] += 1;
        if children[parent as usize] == b {
            open.retain(|&x| x != parent);
        }
        open.push(v);
    }
    let extra = (c * n as f64).ceil() as usize;
    if extra > 0 {
        let present: std::collections::HashSet<(u32, u32)> = edges.iter().copied().collect();
        let mut candidates: Vec<(u32, u32)> = (0..n as u32)
            .flat_map(|a| ((a + 1)..n as u32).map(move |b| (a, b)))
            .filter(|e| !present.contains(e))
            .collect();
        if candidates.len() < extra {
            return Err(Error::config(format!(
                "cyclic component asks for {extra} extra edges but only {} non-edges exist",
                candidates.len()
            )));
        }
        candidates.shuffle(&mut rng);
        edges.extend_from_slice(&candidates[..extra]);
    }
    let mut t = Topology::from_edges(n, &edges, capacity)?;
    t.branching = b;
    t.cyclic = c;
    Ok(t)
}
