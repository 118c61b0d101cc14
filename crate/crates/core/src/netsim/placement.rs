//! Sensor placement by greedy graph coloring.

use super::topology::Topology;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SensorRole {
    Innate,
    Adaptive,
    Plain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub coloring: Vec<usize>,
    pub dh_nodes: Vec<u32>,
    pub da_nodes: Vec<u32>,
    pub plain_nodes: Vec<u32>,
}

impl Placement {
    pub fn role(&self, v: u32) -> SensorRole {
        if self.dh_nodes.binary_search(&v).is_ok() {
            SensorRole::Innate
        } else if self.da_nodes.binary_search(&v).is_ok() {
            SensorRole::Adaptive
        } else {
            SensorRole::Plain
        }
    }
}

/// Colors nodes in descending degree order (ties by id) with the smallest
/// free color. The largest color class hosts adaptive sensors, the second
/// largest innate sensors; equal-sized classes rank by color index.
pub fn place_agents(topo: &Topology) -> Placement {
    let n = topo.node_count();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by(|&a, &b| topo.degree(b).cmp(&topo.degree(a)).then(a.cmp(&b)));
    let mut color = vec![usize::MAX; n];
    for &v in &order {
        let mut used: Vec<usize> = topo
            .neighbors(v)
            .iter()
            .map(|&u| color[u as usize])
            .filter(|&c| c != usize::MAX)
            .collect();
        used.sort_unstable();
        used.dedup();
        let mut c = 0;
        for u in used {
            if u == c {
                c += 1;
            } else if u > c {
                break;
            }
        }
        color[v as usize] = c;
    }
    let colors = color.iter().copied().max().map_or(0, |m| m + 1);
    let mut size = vec![0usize; colors];
    for &c in &color {
        size[c] += 1;
    }
    let mut rank: Vec<usize> = (0..colors).collect();
    rank.sort_by(|&a, &b| size[b].cmp(&size[a]).then(a.cmp(&b)));
    let class = |c: usize| -> Vec<u32> { (0..n as u32).filter(|&v| color[v as usize] == c).collect() };
    let da_nodes = rank.first().map(|&c| class(c)).unwrap_or_default();
    let dh_nodes = rank.get(1).map(|&c| class(c)).unwrap_or_default();
    let plain_nodes = (0..n as u32)
        .filter(|v| da_nodes.binary_search(v).is_err() && dh_nodes.binary_search(v).is_err())
        .collect();
    Placement {
        coloring: color,
        dh_nodes,
        da_nodes,
        plain_nodes,
    }
}
