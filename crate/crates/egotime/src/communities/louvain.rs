//! Louvain modularity optimisation on small undirected graphs.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Weighted undirected graph. `adj[i]` holds `(j, w)` for `j != i`; self
/// weight is kept apart and counts toward `A_ii`.
struct WGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_w: Vec<f64>,
}

impl WGraph {
    fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in pairs {
            if a != b {
                adj[a].push((b, 1.0));
                adj[b].push((a, 1.0));
            }
        }
        Self {
            adj,
            self_w: vec![0.0; n],
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn degree(&self, i: usize) -> f64 {
        self.self_w[i] + self.adj[i].iter().map(|&(_, w)| w).sum::<f64>()
    }

    /// Collapses each community into one node.
    fn aggregate(&self, comm: &[usize], k: usize) -> WGraph {
        let mut self_w = vec![0.0; k];
        let mut acc: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
        for i in 0..self.len() {
            let ci = comm[i];
            self_w[ci] += self.self_w[i];
            for &(j, w) in &self.adj[i] {
                let cj = comm[j];
                if ci == cj {
                    self_w[ci] += w;
                } else {
                    acc[ci].push((cj, w));
                }
            }
        }
        let adj = acc
            .into_iter()
            .map(|mut v| {
                v.sort_unstable_by_key(|&(j, _)| j);
                let mut out: Vec<(usize, f64)> = Vec::with_capacity(v.len());
                for (j, w) in v {
                    match out.last_mut() {
                        Some(l) if l.0 == j => l.1 += w,
                        _ => out.push((j, w)),
                    }
                }
                out
            })
            .collect();
        WGraph { adj, self_w }
    }
}

/// One round of local moves. Returns whether any node changed community.
fn local_moves(g: &WGraph, comm: &mut [usize], m2: f64, rng: &mut ChaCha8Rng) -> bool {
    let n = g.len();
    let k: Vec<f64> = (0..n).map(|i| g.degree(i)).collect();
    let mut tot = vec![0.0; n];
    for i in 0..n {
        tot[comm[i]] += k[i];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut weight_to = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut moved_any = false;
    loop {
        let mut moved = false;
        for &i in &order {
            let ci = comm[i];
            tot[ci] -= k[i];
            touched.clear();
            touched.push(ci);
            weight_to[ci] = 0.0;
            for &(j, w) in &g.adj[i] {
                let cj = comm[j];
                if weight_to[cj] == 0.0 && !touched.contains(&cj) {
                    touched.push(cj);
                }
                weight_to[cj] += w;
            }
            let gain = |c: usize| weight_to[c] - tot[c] * k[i] / m2;
            let mut best = ci;
            let mut best_gain = gain(ci);
            for &c in &touched {
                let gc = gain(c);
                if gc > best_gain + 1e-12 {
                    best = c;
                    best_gain = gc;
                }
            }
            for &c in &touched {
                weight_to[c] = 0.0;
            }
            tot[best] += k[i];
            if best != ci {
                comm[i] = best;
                moved = true;
                moved_any = true;
            }
        }
        if !moved {
            break;
        }
    }
    moved_any
}

/// Renumbers labels to `0..k` in order of first appearance.
pub(crate) fn canonical(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = vec![usize::MAX; labels.iter().copied().max().map_or(0, |m| m + 1)];
    let mut next = 0;
    let out = labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l]
        })
        .collect();
    (out, next)
}

/// Community label per node, canonical (first appearance numbered first).
pub(crate) fn louvain(n: usize, pairs: &[(usize, usize)], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut g = WGraph::from_pairs(n, pairs);
    let m2: f64 = (0..n).map(|i| g.degree(i)).sum();
    let mut node_comm: Vec<usize> = (0..n).collect();
    if m2 == 0.0 {
        return node_comm;
    }
    loop {
        let mut comm: Vec<usize> = (0..g.len()).collect();
        if !local_moves(&g, &mut comm, m2, rng) {
            break;
        }
        let (comm, k) = canonical(&comm);
        for c in node_comm.iter_mut() {
            *c = comm[*c];
        }
        if k == g.len() {
            break;
        }
        g = g.aggregate(&comm, k);
    }
    canonical(&node_comm).0
}

/// Newman modularity of `labels` on the unweighted graph `pairs`.
pub fn modularity(n: usize, pairs: &[(usize, usize)], labels: &[usize]) -> f64 {
    let m = pairs.iter().filter(|(a, b)| a != b).count();
    if m == 0 {
        return 0.0;
    }
    let k = labels.iter().copied().max().map_or(0, |x| x + 1);
    let mut internal = vec![0u64; k];
    let mut degree = vec![0u64; k];
    let mut node_deg = vec![0u64; n];
    for &(a, b) in pairs {
        if a == b {
            continue;
        }
        node_deg[a] += 1;
        node_deg[b] += 1;
        if labels[a] == labels[b] {
            internal[labels[a]] += 1;
        }
    }
    for i in 0..n {
        degree[labels[i]] += node_deg[i];
    }
    let m = m as f64;
    (0..k)
        .map(|c| internal[c] as f64 / m - (degree[c] as f64 / (2.0 * m)).powi(2))
        .sum()
}
