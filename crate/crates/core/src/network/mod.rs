//! Binary brain graphs from EEG windows and their graph-theory metrics.

mod metrics;
mod modularity;
mod series;

pub use metrics::{char_path_length, clustering_coefficient, rewirings, small_world_index, PathLength, SmallWorld, REWIRINGS};
pub use modularity::{greedy_partition, modularity};
pub use series::{metric_series, MetricRow, MetricSeries, DEFAULT_THRESHOLD};

use thiserror::Error;

use crate::signal::EegWindow;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("graph needs at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },
    #[error("graph needs at least {needed} edges, got {got}")]
    TooFewEdges { needed: usize, got: usize },
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("correlation threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("partition covers {got} nodes, graph has {expected}")]
    PartitionMismatch { expected: usize, got: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("malformed metric table: {0}")]
    Table(String),
}

/// Undirected simple graph over labelled nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BrainGraph {
    pub ts: f64,
    nodes: Vec<String>,
    adj: Vec<Vec<bool>>,
}

impl BrainGraph {
    pub fn new(nodes: Vec<String>, edges: &[(usize, usize)], ts: f64) -> Result<Self, NetworkError> {
        let n = nodes.len();
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = nodes.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(NetworkError::InvalidGraph(format!("duplicate node {dup}")));
        }
        let mut adj = vec![vec![false; n]; n];
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(NetworkError::InvalidGraph(format!("bad edge ({i}, {j})")));
            }
            adj[i][j] = true;
            adj[j][i] = true;
        }
        Ok(BrainGraph { ts, nodes, adj })
    }

    /// Graph with nodes named `n0, n1, ...`.
    pub fn unlabeled(n: usize, edges: &[(usize, usize)]) -> Result<Self, NetworkError> {
        BrainGraph::new((0..n).map(|i| format!("n{i}")).collect(), edges, 0.0)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i][j]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].iter().filter(|x| **x).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[i].iter().enumerate().filter(|(_, e)| **e).map(|(j, _)| j)
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n()).map(|i| self.degree(i)).sum::<usize>() / 2
    }

    /// Edges as index pairs `(i, j)` with `i < j`, ordered by node labels so
    /// that the order does not depend on the node indexing.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                if self.adj[i][j] {
                    let (a, b) = if self.nodes[i] <= self.nodes[j] { (i, j) } else { (j, i) };
                    out.push((a, b));
                }
            }
        }
        out.sort_by(|x, y| (&self.nodes[x.0], &self.nodes[x.1]).cmp(&(&self.nodes[y.0], &self.nodes[y.1])));
        out
    }

    /// The same graph with node `i` moved to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> BrainGraph {
        let n = self.n();
        let mut nodes = vec![String::new(); n];
        let mut adj = vec![vec![false; n]; n];
        for i in 0..n {
            nodes[perm[i]] = self.nodes[i].clone();
            for j in 0..n {
                adj[perm[i]][perm[j]] = self.adj[i][j];
            }
        }
        BrainGraph { ts: self.ts, nodes, adj }
    }

    fn with_adjacency(&self, adj: Vec<Vec<bool>>) -> BrainGraph {
        BrainGraph { ts: self.ts, nodes: self.nodes.clone(), adj }
    }
}

/// Community id per node, indexed like the graph's nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub assignment: Vec<usize>,
}

impl Partition {
    pub fn single(n: usize) -> Self {
        Partition { assignment: vec![0; n] }
    }

    pub fn singletons(n: usize) -> Self {
        Partition { assignment: (0..n).collect() }
    }

    pub fn community_count(&self) -> usize {
        self.assignment.iter().collect::<std::collections::BTreeSet<_>>().len()
    }

    /// Communities as sorted sets of node labels, themselves sorted; equal
    /// for partitions that group the same labels regardless of ids.
    pub fn groups(&self, g: &BrainGraph) -> Vec<Vec<String>> {
        let mut by_id: std::collections::BTreeMap<usize, Vec<String>> = Default::default();
        for (i, c) in self.assignment.iter().enumerate() {
            by_id.entry(*c).or_default().push(g.nodes[i].clone());
        }
        let mut out: Vec<Vec<String>> = by_id
            .into_values()
            .map(|mut v| {
                v.sort();
                v
            })
            .collect();
        out.sort();
        out
    }
}

fn pearson(x: &[f32], y: &[f32]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().map(|v| *v as f64).sum::<f64>() / n;
    let my = y.iter().map(|v| *v as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (*a as f64 - mx, *b as f64 - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= f64::EPSILON * n || syy <= f64::EPSILON * n {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Thresholded absolute-correlation graph of one window. A zero-variance
/// channel gets no edges.
pub fn build_graph(window: &EegWindow, channels: &[String], threshold: f64) -> Result<BrainGraph, NetworkError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(NetworkError::InvalidThreshold(threshold));
    }
    let n = window.samples.len();
    if n < 2 {
        return Err(NetworkError::TooFewNodes { needed: 2, got: n });
    }
    if channels.len() != n {
        return Err(NetworkError::InvalidGraph(format!("{} channel labels for {n} channels", channels.len())));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if pearson(&window.samples[i], &window.samples[j]).is_some_and(|r| r.abs() >= threshold) {
                edges.push((i, j));
            }
        }
    }
    BrainGraph::new(channels.to_vec(), &edges, window.start_ts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    fn win(samples: Vec<Vec<f32>>) -> EegWindow {
        EegWindow { start_ts: 4.0, fs_hz: 250.0, samples, label: None }
    }

    #[test]
    fn identical_channels_are_connected() {
        let x: Vec<f32> = (0..500).map(|i| (i as f32 * 0.1).sin()).collect();
        let g = build_graph(&win(vec![x.clone(), x]), &labels(2), 0.5).unwrap();
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
        assert_eq!(g.ts, 4.0);
    }

    #[test]
    fn anticorrelated_channels_are_connected() {
        let x: Vec<f32> = (0..500).map(|i| (i as f32 * 0.1).sin()).collect();
        let y = x.iter().map(|v| -v).collect();
        assert_eq!(build_graph(&win(vec![x, y]), &labels(2), 0.9).unwrap().edge_count(), 1);
    }

    #[test]
    fn constant_channel_has_no_edges() {
        let x: Vec<f32> = (0..500).map(|i| (i as f32 * 0.1).sin()).collect();
        let g = build_graph(&win(vec![x.clone(), x, vec![3.0; 500]]), &labels(3), 0.0).unwrap();
        assert_eq!(g.degree(2), 0);
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn independent_noise_rarely_crosses_high_threshold() {
        let mut edges = 0;
        let mut pairs = 0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples = (0..8).map(|_| (0..500).map(|_| rng.sample::<f32, _>(StandardNormal)).collect()).collect();
            let g = build_graph(&win(samples), &labels(8), 0.99).unwrap();
            edges += g.edge_count();
            pairs += 28;
        }
        assert!((edges as f64 / pairs as f64) < 0.01);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(build_graph(&win(vec![vec![0.0; 10]]), &labels(1), 0.5), Err(NetworkError::TooFewNodes { .. })));
        assert!(matches!(build_graph(&win(vec![vec![0.0; 10]; 2]), &labels(2), 1.5), Err(NetworkError::InvalidThreshold(_))));
        assert!(BrainGraph::unlabeled(3, &[(0, 0)]).is_err());
        assert!(BrainGraph::unlabeled(3, &[(0, 3)]).is_err());
    }

    #[test]
    fn graph_is_symmetric_without_self_loops() {
        let g = BrainGraph::unlabeled(4, &[(0, 1), (2, 1), (3, 0)]).unwrap();
        for i in 0..4 {
            assert!(!g.has_edge(i, i));
            for j in 0..4 {
                assert_eq!(g.has_edge(i, j), g.has_edge(j, i));
            }
        }
        assert_eq!(g.edge_count(), 3);
    }
}
