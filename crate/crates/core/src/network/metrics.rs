use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BrainGraph, NetworkError};

/// Number of degree-preserving rewirings averaged for the small-world baseline.
pub const REWIRINGS: usize = 20;

/// Swap attempts per edge for each rewiring.
const SWAPS_PER_EDGE: usize = 10;

/// Mean local clustering; nodes of degree < 2 contribute 0.
pub fn clustering_coefficient(g: &BrainGraph) -> Result<f64, NetworkError> {
    let n = g.n();
    if n < 3 {
        return Err(NetworkError::TooFewNodes { needed: 3, got: n });
    }
    let mut total = 0.0;
    for i in 0..n {
        let nb: Vec<usize> = g.neighbors(i).collect();
        let k = nb.len();
        if k < 2 {
            continue;
        }
        let mut closed = 0usize;
        for (x, &a) in nb.iter().enumerate() {
            for &b in &nb[x + 1..] {
                closed += g.has_edge(a, b) as usize;
            }
        }
        total += closed as f64 / (k * (k - 1) / 2) as f64;
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLength {
    /// Mean shortest path over node pairs of the measured component;
    /// `None` when that component is a single node.
    pub value: Option<f64>,
    /// `false` when the graph is disconnected and only the largest
    /// component was measured.
    pub connected: bool,
    pub component_size: usize,
}

fn bfs(g: &BrainGraph, src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n()];
    dist[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        let d = dist[u].unwrap_or(0);
        for v in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                q.push_back(v);
            }
        }
    }
    dist
}

/// Characteristic path length by breadth-first search. On a disconnected
/// graph the largest component is measured (ties go to the component
/// holding the smallest node label) and the result is flagged.
pub fn char_path_length(g: &BrainGraph) -> PathLength {
    let n = g.n();
    let dists: Vec<Vec<Option<usize>>> = (0..n).map(|s| bfs(g, s)).collect();
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&v| dists[s][v].is_some()).collect();
        for &v in &members {
            comp[v] = comps.len();
        }
        comps.push(members);
    }
    let min_label = |c: &Vec<usize>| c.iter().map(|&i| g.nodes[i].as_str()).min().unwrap_or("");
    let Some(best) = comps.iter().max_by(|a, b| a.len().cmp(&b.len()).then_with(|| min_label(b).cmp(min_label(a)))) else {
        return PathLength { value: None, connected: true, component_size: 0 };
    };
    let k = best.len();
    let value = (k >= 2).then(|| {
        let mut sum = 0usize;
        for (x, &a) in best.iter().enumerate() {
            for &b in &best[x + 1..] {
                sum += dists[a][b].unwrap_or(0);
            }
        }
        sum as f64 / (k * (k - 1) / 2) as f64
    });
    PathLength { value, connected: comps.len() <= 1, component_size: k }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallWorld {
    /// `(C/C_rand)/(L/L_rand)`; `None` when a ratio is undefined.
    pub sigma: Option<f64>,
    pub c: f64,
    pub l: f64,
    pub c_rand: f64,
    pub l_rand: f64,
    /// Whether any degree-preserving swap succeeded. When none did, the
    /// baseline is the graph itself.
    pub rewired: bool,
}

fn rewire_once(g: &BrainGraph, rng: &mut ChaCha8Rng) -> (BrainGraph, bool) {
    let mut edges = g.edges();
    let mut adj: Vec<Vec<bool>> = (0..g.n()).map(|i| (0..g.n()).map(|j| g.has_edge(i, j)).collect()).collect();
    let ordered = |x: usize, y: usize| if g.nodes[x] <= g.nodes[y] { (x, y) } else { (y, x) };
    let e = edges.len();
    let mut swapped = false;
    if e < 2 {
        return (g.clone(), false);
    }
    for _ in 0..SWAPS_PER_EDGE * e {
        let i = rng.random_range(0..e);
        let j = rng.random_range(0..e);
        if i == j {
            continue;
        }
        let ((a, b), (c, d)) = (edges[i], edges[j]);
        let (x, y) = if rng.random::<bool>() { ((a, d), (c, b)) } else { ((a, c), (b, d)) };
        if a == c || a == d || b == c || b == d || adj[x.0][x.1] || adj[y.0][y.1] {
            continue;
        }
        for (u, v) in [(a, b), (c, d)] {
            adj[u][v] = false;
            adj[v][u] = false;
        }
        for (u, v) in [x, y] {
            adj[u][v] = true;
            adj[v][u] = true;
        }
        edges[i] = ordered(x.0, x.1);
        edges[j] = ordered(y.0, y.1);
        swapped = true;
    }
    (g.with_adjacency(adj), swapped)
}

/// The [`REWIRINGS`] degree-preserving double-edge-swap randomisations of
/// `g` used as the small-world baseline, plus whether any swap succeeded.
/// Edges are drawn from a label-ordered list, so node relabeling yields
/// isomorphic results.
pub fn rewirings(g: &BrainGraph, seed: u64) -> (Vec<BrainGraph>, bool) {
    let mut any = false;
    let graphs = (0..REWIRINGS)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let (h, ok) = rewire_once(g, &mut rng);
            any |= ok;
            h
        })
        .collect();
    (graphs, any)
}

pub fn small_world_index(g: &BrainGraph, seed: u64) -> Result<SmallWorld, NetworkError> {
    if g.n() < 4 {
        return Err(NetworkError::TooFewNodes { needed: 4, got: g.n() });
    }
    let m = g.edge_count();
    if m < 3 {
        return Err(NetworkError::TooFewEdges { needed: 3, got: m });
    }
    let c = clustering_coefficient(g)?;
    let l = char_path_length(g).value.unwrap_or(0.0);
    let (graphs, rewired) = rewirings(g, seed);
    let (c_rand, l_rand) = if rewired {
        let mut cs = 0.0;
        let mut ls = 0.0;
        for h in &graphs {
            cs += clustering_coefficient(h)?;
            ls += char_path_length(h).value.unwrap_or(0.0);
        }
        (cs / graphs.len() as f64, ls / graphs.len() as f64)
    } else {
        (c, l)
    };
    let sigma = (c_rand > 0.0 && l > 0.0 && l_rand > 0.0).then(|| (c / c_rand) / (l / l_rand));
    Ok(SmallWorld { sigma, c, l, c_rand, l_rand, rewired })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn k4() -> BrainGraph {
        BrainGraph::unlabeled(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap()
    }

    fn graph_from_bits(n: usize, bits: u64) -> BrainGraph {
        let mut edges = Vec::new();
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                if bits >> k & 1 == 1 {
                    edges.push((i, j));
                }
                k += 1;
            }
        }
        BrainGraph::unlabeled(n, &edges).unwrap()
    }

    /// Triangle enumeration over all ordered node triples.
    fn clustering_oracle(g: &BrainGraph) -> f64 {
        let n = g.n();
        let mut total = 0.0;
        for i in 0..n {
            let deg = (0..n).filter(|&j| g.has_edge(i, j)).count();
            if deg < 2 {
                continue;
            }
            let mut tri = 0;
            for j in 0..n {
                for k in 0..n {
                    if j < k && g.has_edge(i, j) && g.has_edge(i, k) && g.has_edge(j, k) {
                        tri += 1;
                    }
                }
            }
            total += tri as f64 / (deg * (deg - 1) / 2) as f64;
        }
        total / n as f64
    }

    /// Floyd–Warshall all-pairs distances, then the same component rule.
    fn path_length_oracle(g: &BrainGraph) -> Option<f64> {
        let n = g.n();
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; n]; n];
        for i in 0..n {
            d[i][i] = 0;
            for j in 0..n {
                if g.has_edge(i, j) {
                    d[i][j] = 1;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        let mut best: Option<Vec<usize>> = None;
        for s in 0..n {
            let comp: Vec<usize> = (0..n).filter(|&v| d[s][v] < inf).collect();
            let min_label = |c: &Vec<usize>| c.iter().map(|&i| g.nodes()[i].clone()).min().unwrap();
            let take = match &best {
                None => true,
                Some(b) => comp.len() > b.len() || (comp.len() == b.len() && min_label(&comp) < min_label(b)),
            };
            if take {
                best = Some(comp);
            }
        }
        let c = best?;
        if c.len() < 2 {
            return None;
        }
        let mut sum = 0;
        let mut pairs = 0;
        for &a in &c {
            for &b in &c {
                if a < b {
                    sum += d[a][b];
                    pairs += 1;
                }
            }
        }
        Some(sum as f64 / pairs as f64)
    }

    fn ring_lattice_with_shortcuts() -> BrainGraph {
        let n = 12;
        let mut edges = Vec::new();
        for i in 0..n {
            edges.push((i, (i + 1) % n));
            edges.push((i, (i + 2) % n));
        }
        edges.push((0, 6));
        edges.push((3, 9));
        BrainGraph::unlabeled(n, &edges).unwrap()
    }

    #[test]
    fn complete_graph() {
        assert_eq!(clustering_coefficient(&k4()).unwrap(), 1.0);
        let pl = char_path_length(&k4());
        assert_eq!(pl.value, Some(1.0));
        assert!(pl.connected);
    }

    #[test]
    fn star_has_no_clustering() {
        let g = BrainGraph::unlabeled(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        assert_eq!(clustering_coefficient(&g).unwrap(), 0.0);
    }

    #[test]
    fn three_node_path() {
        let g = BrainGraph::unlabeled(3, &[(0, 1), (1, 2)]).unwrap();
        assert!((char_path_length(&g).value.unwrap() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_graph_is_flagged() {
        let g = BrainGraph::unlabeled(5, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let pl = char_path_length(&g);
        assert!(!pl.connected);
        assert_eq!(pl.component_size, 3);
        assert_eq!(char_path_length(&BrainGraph::unlabeled(3, &[]).unwrap()).value, None);
    }

    #[test]
    fn too_small_for_clustering() {
        assert!(clustering_coefficient(&BrainGraph::unlabeled(2, &[(0, 1)]).unwrap()).is_err());
    }

    #[test]
    fn k4_is_its_own_baseline() {
        let sw = small_world_index(&k4(), 7).unwrap();
        assert!(!sw.rewired);
        assert_eq!(sw.sigma, Some(1.0));
    }

    #[test]
    fn ring_lattice_is_small_world() {
        let g = ring_lattice_with_shortcuts();
        let sw = small_world_index(&g, 11).unwrap();
        assert!(sw.rewired);
        let (graphs, _) = rewirings(&g, 11);
        let c_rand = graphs.iter().map(clustering_oracle).sum::<f64>() / graphs.len() as f64;
        let l_rand = graphs.iter().map(|h| path_length_oracle(h).unwrap()).sum::<f64>() / graphs.len() as f64;
        let oracle = (clustering_oracle(&g) / c_rand) / (path_length_oracle(&g).unwrap() / l_rand);
        assert!((sw.sigma.unwrap() - oracle).abs() < 1e-12);
        assert!(oracle > 1.0, "{oracle}");
    }

    #[test]
    fn rewiring_preserves_degrees() {
        let g = ring_lattice_with_shortcuts();
        for h in rewirings(&g, 3).0 {
            for i in 0..g.n() {
                assert_eq!(h.degree(i), g.degree(i));
            }
        }
    }

    #[test]
    fn small_world_is_deterministic() {
        let g = ring_lattice_with_shortcuts();
        assert_eq!(small_world_index(&g, 5).unwrap(), small_world_index(&g, 5).unwrap());
    }

    #[test]
    fn small_world_preconditions() {
        assert!(matches!(small_world_index(&BrainGraph::unlabeled(3, &[(0, 1), (1, 2), (0, 2)]).unwrap(), 1), Err(NetworkError::TooFewNodes { .. })));
        assert!(matches!(small_world_index(&BrainGraph::unlabeled(5, &[(0, 1), (1, 2)]).unwrap(), 1), Err(NetworkError::TooFewEdges { .. })));
    }

    #[test]
    fn triangle_free_baseline_is_undefined() {
        // 6-cycle: every rewiring is triangle-free or disconnected cycles
        let g = BrainGraph::unlabeled(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]).unwrap();
        let sw = small_world_index(&g, 2).unwrap();
        if sw.c_rand == 0.0 {
            assert_eq!(sw.sigma, None);
        }
    }

    fn shuffle(n: usize, mut s: u64) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, (s % (i as u64 + 1)) as usize);
            s /= i as u64 + 1;
        }
        perm
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn clustering_matches_triangle_oracle(bits in any::<u64>()) {
            let g = graph_from_bits(8, bits);
            prop_assert_eq!(clustering_coefficient(&g).unwrap(), clustering_oracle(&g));
        }

        #[test]
        fn path_length_matches_floyd_warshall(bits in any::<u64>()) {
            let g = graph_from_bits(8, bits);
            prop_assert_eq!(char_path_length(&g).value, path_length_oracle(&g));
        }

        #[test]
        fn metrics_invariant_under_relabeling(bits in any::<u64>(), s in any::<u64>(), seed in any::<u64>()) {
            let g = graph_from_bits(8, bits);
            let h = g.permuted(&shuffle(8, s));
            prop_assert!((clustering_coefficient(&g).unwrap() - clustering_coefficient(&h).unwrap()).abs() < 1e-12);
            prop_assert_eq!(char_path_length(&g), char_path_length(&h));
            if g.edge_count() >= 3 {
                let (a, b) = (small_world_index(&g, seed).unwrap(), small_world_index(&h, seed).unwrap());
                prop_assert!((a.c_rand - b.c_rand).abs() < 1e-9 && (a.l_rand - b.l_rand).abs() < 1e-9);
            }
        }
    }
}
