use super::{BrainGraph, NetworkError, Partition};

/// Newman–Girvan modularity `Σ_c [e_c/m − (d_c/2m)²]`.
pub fn modularity(g: &BrainGraph, p: &Partition) -> Result<f64, NetworkError> {
    if p.assignment.len() != g.n() {
        return Err(NetworkError::PartitionMismatch { expected: g.n(), got: p.assignment.len() });
    }
    let m = g.edge_count();
    if m == 0 {
        return Err(NetworkError::EmptyGraph);
    }
    let k = p.assignment.iter().max().map_or(0, |c| c + 1);
    let mut intra = vec![0usize; k];
    let mut deg = vec![0usize; k];
    for (i, j) in g.edges() {
        if p.assignment[i] == p.assignment[j] {
            intra[p.assignment[i]] += 1;
        }
    }
    for i in 0..g.n() {
        deg[p.assignment[i]] += g.degree(i);
    }
    let m = m as f64;
    Ok((0..k).map(|c| intra[c] as f64 / m - (deg[c] as f64 / (2.0 * m)).powi(2)).sum())
}

struct Community {
    label: String,
    members: Vec<usize>,
    degree: i64,
}

/// Agglomerative greedy modularity maximisation: start from singletons and
/// merge the pair with the largest positive gain until none is left. Gains
/// are compared as exact integers `2m·e_ab − d_a·d_b`; ties go to the pair
/// whose smallest member labels sort first.
pub fn greedy_partition(g: &BrainGraph) -> Result<Partition, NetworkError> {
    let m = g.edge_count() as i64;
    if m == 0 {
        return Err(NetworkError::EmptyGraph);
    }
    let mut comms: Vec<Community> = (0..g.n()).map(|i| Community { label: g.nodes[i].clone(), members: vec![i], degree: g.degree(i) as i64 }).collect();
    let mut between: Vec<Vec<i64>> = (0..g.n()).map(|i| (0..g.n()).map(|j| g.has_edge(i, j) as i64).collect()).collect();

    loop {
        let mut best: Option<(i64, (&str, &str), usize, usize)> = None;
        for a in 0..comms.len() {
            for b in a + 1..comms.len() {
                let gain = 2 * m * between[a][b] - comms[a].degree * comms[b].degree;
                if gain <= 0 {
                    continue;
                }
                let key = if comms[a].label <= comms[b].label {
                    (comms[a].label.as_str(), comms[b].label.as_str())
                } else {
                    (comms[b].label.as_str(), comms[a].label.as_str())
                };
                let better = match &best {
                    None => true,
                    Some((bg, bk, _, _)) => gain > *bg || (gain == *bg && key < *bk),
                };
                if better {
                    best = Some((gain, key, a, b));
                }
            }
        }
        let Some((_, _, a, b)) = best else { break };
        let absorbed = comms.remove(b);
        let row = between.remove(b);
        for r in between.iter_mut() {
            r.remove(b);
        }
        for (c, v) in row.iter().enumerate().filter(|(c, _)| *c != b) {
            let c = if c > b { c - 1 } else { c };
            if c != a {
                between[a][c] += v;
                between[c][a] += v;
            }
        }
        let target = &mut comms[a];
        target.members.extend(absorbed.members);
        target.degree += absorbed.degree;
        if absorbed.label < target.label {
            target.label = absorbed.label;
        }
    }

    comms.sort_by(|x, y| x.label.cmp(&y.label));
    let mut assignment = vec![0; g.n()];
    for (id, c) in comms.iter().enumerate() {
        for &i in &c.members {
            assignment[i] = id;
        }
    }
    Ok(Partition { assignment })
}
