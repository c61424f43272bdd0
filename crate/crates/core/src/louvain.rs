//! Multi-level Louvain modularity maximization on small weighted graphs.
//!
//! Node visiting order is a seeded shuffle per level; candidate communities are
//! scanned in ascending id order and a node moves only on strict improvement,
//! so a given seed always yields the same partition.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const GAIN_EPS: f64 = 1e-12;
const MAX_PASSES: usize = 1000;

/// Undirected weighted graph without self-loops.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    adj: Vec<BTreeMap<usize, f64>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![BTreeMap::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Add `w` to the weight of edge `{i, j}`.
    pub fn add_edge(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        let n = self.adj.len();
        if i >= n || j >= n {
            return Err(Error::invalid(format!("edge ({i}, {j}) outside a graph of {n} nodes")));
        }
        if i == j {
            return Err(Error::invalid(format!("self-loop on node {i}")));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::invalid(format!("edge ({i}, {j}) has weight {w}")));
        }
        *self.adj[i].entry(j).or_insert(0.0) += w;
        *self.adj[j].entry(i).or_insert(0.0) += w;
        Ok(())
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adj[i].get(&j).copied().unwrap_or(0.0)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeMap::len).sum::<usize>() / 2
    }

    fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        self.adj
            .iter()
            .map(|row| row.iter().map(|(&j, &w)| (j, w)).collect())
            .collect()
    }
}

/// Newman modularity with resolution `gamma`. Zero for a graph without edges.
pub fn modularity(graph: &Graph, labels: &[usize], gamma: f64) -> f64 {
    assert_eq!(labels.len(), graph.len(), "one label per node");
    let degree: Vec<f64> = graph.adj.iter().map(|r| r.values().sum()).collect();
    let m2: f64 = degree.iter().sum();
    if m2 == 0.0 {
        return 0.0;
    }
    let mut inner: BTreeMap<usize, f64> = BTreeMap::new();
    let mut total: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, row) in graph.adj.iter().enumerate() {
        *total.entry(labels[i]).or_insert(0.0) += degree[i];
        for (&j, &w) in row {
            if labels[i] == labels[j] {
                *inner.entry(labels[i]).or_insert(0.0) += w;
            }
        }
    }
    total
        .iter()
        .map(|(c, &t)| inner.get(c).copied().unwrap_or(0.0) - gamma * t * t / m2)
        .sum::<f64>()
        / m2
}

/// Community label per node. Labels are dense and numbered in order of each
/// community's smallest node index.
pub fn louvain(graph: &Graph, gamma: f64, seed: u64) -> Result<Vec<usize>> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("resolution must be positive, got {gamma}")));
    }
    let n = graph.len();
    let mut rows = graph.rows();
    let m2: f64 = rows.iter().flatten().map(|&(_, w)| w).sum();
    let mut membership: Vec<usize> = (0..n).collect();
    if m2 == 0.0 {
        return Ok(membership);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let (labels, moved) = local_moves(&rows, m2, gamma, &mut rng);
        if !moved {
            break;
        }
        for m in membership.iter_mut() {
            *m = labels[*m];
        }
        rows = aggregate(&rows, &labels);
    }
    Ok(canonical(&membership))
}

/// Group node indices by label, groups ordered by smallest member.
pub fn communities(labels: &[usize]) -> Vec<Vec<usize>> {
    let labels = canonical(labels);
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); k];
    for (i, &c) in labels.iter().enumerate() {
        out[c].push(i);
    }
    out
}

fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut remap = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = remap.len();
            *remap.entry(*l).or_insert(next)
        })
        .collect()
}

/// One level of node moves on a graph whose rows may include self-loops.
/// Returns dense community labels and whether any node moved.
fn local_moves(rows: &[Vec<(usize, f64)>], m2: f64, gamma: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = rows.len();
    let degree: Vec<f64> = rows.iter().map(|r| r.iter().map(|&(_, w)| w).sum()).collect();
    let mut comm: Vec<usize> = (0..n).collect();
    let mut total = degree.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut moved = false;
    for _ in 0..MAX_PASSES {
        let mut improved = false;
        for &i in &order {
            let own = comm[i];
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            for &(j, w) in &rows[i] {
                if j != i {
                    *links.entry(comm[j]).or_insert(0.0) += w;
                }
            }
            total[own] -= degree[i];
            let gain = |c: usize, w: f64| w - gamma * total[c] * degree[i] / m2;
            let mut best = own;
            let mut best_gain = gain(own, links.get(&own).copied().unwrap_or(0.0));
            for (&c, &w) in &links {
                let g = gain(c, w);
                if g > best_gain + GAIN_EPS {
                    best = c;
                    best_gain = g;
                }
            }
            total[best] += degree[i];
            if best != own {
                comm[i] = best;
                improved = true;
                moved = true;
            }
        }
        if !improved {
            break;
        }
    }
    (canonical(&comm), moved)
}

fn aggregate(rows: &[Vec<(usize, f64)>], labels: &[usize]) -> Vec<Vec<(usize, f64)>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut out: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
    for (i, row) in rows.iter().enumerate() {
        for &(j, w) in row {
            *out[labels[i]].entry(labels[j]).or_insert(0.0) += w;
        }
    }
    out.into_iter().map(|r| r.into_iter().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangles() -> Graph {
        let mut g = Graph::new(6);
        for &(i, j) in &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
            g.add_edge(i, j, 1.0).unwrap();
        }
        g
    }

    /// Every set partition of `0..n` as restricted growth strings.
    fn all_partitions(n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = vec![0usize; n];
        fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if i == cur.len() {
                out.push(cur.clone());
                return;
            }
            for l in 0..=max + 1 {
                cur[i] = l;
                rec(i + 1, max.max(l), cur, out);
            }
        }
        if n > 0 {
            rec(1, 0, &mut cur, &mut out);
        }
        out
    }

    /// Modularity straight from the double-sum definition.
    fn modularity_by_definition(g: &Graph, labels: &[usize], gamma: f64) -> f64 {
        let n = g.len();
        let k: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g.weight(i, j)).sum()).collect();
        let m2: f64 = k.iter().sum();
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] == labels[j] {
                    q += g.weight(i, j) - gamma * k[i] * k[j] / m2;
                }
            }
        }
        q / m2
    }

    #[test]
    fn partition_enumeration_counts() {
        assert_eq!(all_partitions(4).len(), 15);
        assert_eq!(all_partitions(6).len(), 203);
    }

    #[test]
    fn two_triangles_match_exhaustive_optimum() {
        let g = triangles();
        let (best_q, best) = all_partitions(6)
            .into_iter()
            .map(|p| (modularity_by_definition(&g, &p, 1.0), p))
            .fold((f64::NEG_INFINITY, vec![]), |acc, x| if x.0 > acc.0 { x } else { acc });
        assert_eq!(best, [0, 0, 0, 1, 1, 1]);
        let labels = louvain(&g, 1.0, 1).unwrap();
        assert_eq!(labels, best);
        assert!((modularity(&g, &labels, 1.0) - best_q).abs() < 1e-12);
        assert!((best_q - 0.5).abs() < 1e-12);
    }

    #[test]
    fn edgeless_graph_is_all_singletons() {
        let g = Graph::new(4);
        assert_eq!(louvain(&g, 1.0, 3).unwrap(), [0, 1, 2, 3]);
        assert_eq!(louvain(&Graph::new(1), 1.0, 3).unwrap(), [0]);
        assert!(louvain(&Graph::new(0), 1.0, 3).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        let mut g = Graph::new(2);
        assert!(g.add_edge(0, 0, 1.0).is_err());
        assert!(g.add_edge(0, 2, 1.0).is_err());
        assert!(g.add_edge(0, 1, -1.0).is_err());
        assert!(louvain(&g, 0.0, 1).is_err());
    }

    #[test]
    fn components_never_merge_across_resolutions() {
        let g = triangles();
        for gamma in [0.25, 0.5, 1.0] {
            assert_eq!(communities(&louvain(&g, gamma, 5).unwrap()).len(), 2, "gamma {gamma}");
        }
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (2usize..12).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n, 0.1f64..2.0), 0..30).prop_map(move |edges| {
                let mut g = Graph::new(n);
                for (i, j, w) in edges {
                    if i != j {
                        g.add_edge(i, j, w).unwrap();
                    }
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn modularity_matches_definition(g in arb_graph(), seed in any::<u64>()) {
            prop_assume!(g.edge_count() > 0);
            let labels = louvain(&g, 1.0, seed).unwrap();
            let fast = modularity(&g, &labels, 1.0);
            prop_assert!((fast - modularity_by_definition(&g, &labels, 1.0)).abs() < 1e-9);
        }

        #[test]
        fn never_worse_than_singletons_and_deterministic(g in arb_graph(), seed in any::<u64>(), gamma in 0.2f64..2.0) {
            let labels = louvain(&g, gamma, seed).unwrap();
            let singletons: Vec<usize> = (0..g.len()).collect();
            prop_assert!(modularity(&g, &labels, gamma) >= modularity(&g, &singletons, gamma) - 1e-12);
            prop_assert_eq!(louvain(&g, gamma, seed).unwrap(), labels);
        }
    }
}
