//! Brute-force oracles and fixture generators shared by the integration tests.
//! Everything here works on raw records and plain collections; none of it
//! calls into the structures under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use egotime::matching::{GroupMember, MatchingGroup};
use egotime::{EdgeRecord, NodeId, Origin, TimeGraph, Timestamp};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn label(i: usize) -> String {
    format!("n{i}")
}

/// `n_edges` distinct directed pairs over `n_nodes` nodes, no self-loops,
/// times uniform in `[0, t_max)`, a third of them recommended. Returned in
/// input order, which is not time order.
pub fn random_records(rng: &mut impl Rng, n_nodes: usize, n_edges: usize, t_max: Timestamp) -> Vec<EdgeRecord> {
    assert!(n_edges <= n_nodes * (n_nodes - 1));
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n_edges);
    while out.len() < n_edges {
        let a = rng.random_range(0..n_nodes);
        let b = rng.random_range(0..n_nodes);
        if a == b || !seen.insert((a, b)) {
            continue;
        }
        let origin = if rng.random_bool(1.0 / 3.0) {
            Origin::Recommended
        } else {
            Origin::Spontaneous
        };
        out.push(EdgeRecord::new(label(a), label(b), rng.random_range(0..t_max)).with_origin(origin));
    }
    out
}

pub fn load(records: &[EdgeRecord]) -> TimeGraph {
    TimeGraph::load(records.to_vec(), Vec::new(), true).expect("valid records").0
}

/// Label order used for ties: numeric labels first, by value, then the rest
/// as strings.
pub fn label_order(l: &str) -> (u8, u64, &str) {
    match l.parse::<u64>() {
        Ok(v) => (0, v, l),
        Err(_) => (1, 0, l),
    }
}

/// Records in creation order: time, then source and target label.
pub fn creation_order(records: &[EdgeRecord]) -> Vec<&EdgeRecord> {
    let mut out: Vec<&EdgeRecord> = records.iter().collect();
    out.sort_by(|a, b| {
        (a.created_at, label_order(&a.src), label_order(&a.dst)).cmp(&(b.created_at, label_order(&b.src), label_order(&b.dst)))
    });
    out
}

/// Targets of `u` among edges with `created_at <= t` (or `< t` when
/// `strict`), in creation order.
pub fn scan_out(records: &[EdgeRecord], u: &str, t: Timestamp, strict: bool) -> Vec<String> {
    creation_order(records)
        .into_iter()
        .filter(|e| e.src == u && admits(e.created_at, t, strict))
        .map(|e| e.dst.clone())
        .collect()
}

pub fn scan_in(records: &[EdgeRecord], u: &str, t: Timestamp, strict: bool) -> Vec<String> {
    creation_order(records)
        .into_iter()
        .filter(|e| e.dst == u && admits(e.created_at, t, strict))
        .map(|e| e.src.clone())
        .collect()
}

fn admits(created: Timestamp, t: Timestamp, strict: bool) -> bool {
    if strict {
        created < t
    } else {
        created <= t
    }
}

/// `|out(i) ∩ in(j)|` by set intersection, excluding `i` and `j` themselves.
pub fn scan_cn(records: &[EdgeRecord], i: &str, j: &str, t: Timestamp, strict: bool) -> usize {
    let outs: BTreeSet<String> = scan_out(records, i, t, strict).into_iter().collect();
    let ins: BTreeSet<String> = scan_in(records, j, t, strict).into_iter().collect();
    outs.intersection(&ins).filter(|l| *l != i && *l != j).count()
}

/// Union-find with path halving, kept apart from the library's own.
pub struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Dsu {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
            self.parent[small] = big;
            self.size[big] += self.size[small];
        }
    }
}

/// One BFS per node over an undirected adjacency list; returns
/// `(sum of distances, connected unordered pairs)`, optionally restricted to
/// nodes where `keep` is true.
pub fn bfs_distance(adj: &[Vec<usize>], keep: Option<&[bool]>) -> (u64, u64) {
    let n = adj.len();
    let (mut total, mut pairs) = (0u64, 0u64);
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        if keep.is_some_and(|k| !k[s]) {
            continue;
        }
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        for t in s + 1..n {
            if dist[t] != usize::MAX && keep.is_none_or(|k| k[t]) {
                total += dist[t] as u64;
                pairs += 1;
            }
        }
    }
    (total, pairs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleStep {
    pub edges: usize,
    pub gcc_ratio: f64,
    pub n_components: usize,
    pub net_distance: Option<f64>,
    pub giant_distance: Option<f64>,
    pub spawned: bool,
}

/// Rebuilds the ego-network of `ego` after each addition from the raw
/// records: the first `n` alters in creation order, and the edges among them
/// created no later than the `n`-th addition.
pub fn ego_oracle(records: &[EdgeRecord], ego: &str) -> Vec<OracleStep> {
    let ordered = creation_order(records);
    let mut alters: Vec<(&str, Timestamp)> = Vec::new();
    for e in &ordered {
        if e.src == ego && !alters.iter().any(|a| a.0 == e.dst) {
            alters.push((&e.dst, e.created_at));
        }
    }
    let mut steps = Vec::new();
    for n in 1..=alters.len() {
        let t = alters[n - 1].1;
        let pos: BTreeMap<&str, usize> = alters[..n].iter().enumerate().map(|(i, a)| (a.0, i)).collect();
        let mut adj = vec![Vec::new(); n];
        let mut directed = BTreeSet::new();
        for e in &ordered {
            if e.created_at > t {
                break;
            }
            if let (Some(&a), Some(&b)) = (pos.get(e.src.as_str()), pos.get(e.dst.as_str())) {
                directed.insert((a, b));
                if !adj[a].contains(&b) {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
        }
        let mut dsu = Dsu::new(n);
        for (a, b) in &directed {
            dsu.union(*a, *b);
        }
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for x in 0..n {
            *sizes.entry(dsu.find(x)).or_default() += 1;
        }
        let largest = *sizes.values().max().unwrap();
        // Largest component, ties to the one holding the lowest index.
        let giant_root = (0..n).map(|x| dsu.find(x)).find(|r| sizes[r] == largest).unwrap();
        let keep: Vec<bool> = (0..n).map(|x| dsu.find(x) == giant_root).collect();
        let mean = |(total, pairs): (u64, u64)| (pairs > 0).then(|| total as f64 / pairs as f64);
        steps.push(OracleStep {
            edges: directed.len(),
            gcc_ratio: largest as f64 / n as f64,
            n_components: sizes.len(),
            net_distance: mean(bfs_distance(&adj, None)),
            giant_distance: mean(bfs_distance(&adj, Some(&keep))),
            spawned: n >= 2 && adj[n - 1].is_empty(),
        });
    }
    steps
}

/// A random ego-network fixture: `ego` follows `size` members at random
/// times (with ties), members link among themselves with probability `p`,
/// and there is noise the ego-network must ignore (links to and from the ego,
/// to outsiders, and intra links created after the last addition).
pub fn random_ego_fixture(rng: &mut impl Rng, size: usize, p: f64) -> Vec<EdgeRecord> {
    let span = (size as i64 * 50).max(10);
    let m = |i: usize| format!("m{i}");
    let mut recs = Vec::new();
    for i in 0..size {
        recs.push(EdgeRecord::new("ego", m(i), rng.random_range(0..span)));
    }
    for a in 0..size {
        for b in 0..size {
            if a != b && rng.random_bool(p) {
                recs.push(EdgeRecord::new(m(a), m(b), rng.random_range(0..span + 100)));
            }
        }
        if rng.random_bool(0.2) {
            recs.push(EdgeRecord::new(m(a), "ego", rng.random_range(0..span)));
        }
        if rng.random_bool(0.2) {
            recs.push(EdgeRecord::new(m(a), format!("out{}", rng.random_range(0..5)), rng.random_range(0..span)));
        }
    }
    recs.shuffle(rng);
    recs
}

/// Gap-scan sessionization of sorted times: returns batch sizes.
pub fn gap_scan(times: &[Timestamp], timeout: Timestamp) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut current = 0;
    for (k, &t) in times.iter().enumerate() {
        if k > 0 && t - times[k - 1] >= timeout {
            sizes.push(current);
            current = 0;
        }
        current += 1;
    }
    if current > 0 {
        sizes.push(current);
    }
    sizes
}

/// Inversion score by enumerating every pair.
pub fn inversion_by_pairs(l: &[usize]) -> f64 {
    let n = l.len();
    let mut inv = 0u64;
    for a in 0..n {
        for b in a + 1..n {
            if l[a] > l[b] {
                inv += 1;
            }
        }
    }
    1.0 - 2.0 * inv as f64 / (n * (n - 1) / 2) as f64
}

/// Next permutation in lexicographic order; false after the last one.
pub fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Mean inversion score over every arrangement of `l`, each permutation of
/// positions counted once.
pub fn null_mean_by_enumeration(l: &[usize]) -> f64 {
    let mut idx: Vec<usize> = (0..l.len()).collect();
    let (mut sum, mut count) = (0.0, 0u64);
    loop {
        let arranged: Vec<usize> = idx.iter().map(|&k| l[k]).collect();
        sum += inversion_by_pairs(&arranged);
        count += 1;
        if !next_permutation(&mut idx) {
            break;
        }
    }
    sum / count as f64
}

/// Newman modularity from the adjacency matrix definition.
pub fn modularity_by_matrix(n: usize, pairs: &[(usize, usize)], labels: &[usize]) -> f64 {
    let mut a = vec![vec![0.0; n]; n];
    for &(x, y) in pairs {
        a[x][y] = 1.0;
        a[y][x] = 1.0;
    }
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Calls `f` with every set partition of `0..n` as restricted-growth labels.
pub fn for_each_partition(n: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(labels: &mut Vec<usize>, n: usize, f: &mut impl FnMut(&[usize])) {
        if labels.len() == n {
            f(labels);
            return;
        }
        let limit = labels.iter().max().map_or(0, |m| m + 1);
        for l in 0..=limit {
            labels.push(l);
            rec(labels, n, f);
            labels.pop();
        }
    }
    rec(&mut Vec::with_capacity(n), n, f);
}

/// Two 5-cliques on nodes 0..5 and 5..10 joined by the edge (4, 5).
pub fn two_cliques() -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for base in [0, 5] {
        for a in base..base + 5 {
            for b in a + 1..base + 5 {
                pairs.push((a, b));
            }
        }
    }
    pairs.push((4, 5));
    pairs
}

/// `-Σ p log2 p / log2 N` computed from sorted counts.
pub fn entropy_by_counts<T: Ord>(bag: &[T]) -> f64 {
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for x in bag {
        *counts.entry(x).or_default() += 1;
    }
    let n = bag.len() as f64;
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h / n.log2()
}

/// An ego whose network holds exactly `round(n^gamma)` directed edges after
/// each addition from `n = 5` on.
pub fn planted_densification(r: &mut impl Rng, size: usize, gamma: f64) -> Vec<EdgeRecord> {
    let m = |i: usize| format!("m{i}");
    let target = |n: usize| (n as f64).powf(gamma).round() as usize;
    let mut recs = Vec::new();
    let mut present = std::collections::BTreeSet::new();
    for n in 1..=size {
        let t = n as i64 * 10;
        recs.push(EdgeRecord::new("ego", m(n - 1), t));
        if n < 5 {
            continue;
        }
        let mut free: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && !present.contains(&(a, b)))
            .collect();
        free.shuffle(r);
        let need = target(n) - present.len();
        for &(a, b) in &free[..need] {
            present.insert((a, b));
            recs.push(EdgeRecord::new(m(a), m(b), t));
        }
    }
    recs
}

/// Records for an ego that adds `order` (member indices) one per minute,
/// with the undirected `pairs` among members present from the start.
pub fn ego_records(order: &[usize], pairs: &[(usize, usize)]) -> Vec<EdgeRecord> {
    let mut recs: Vec<EdgeRecord> = order
        .iter()
        .enumerate()
        .map(|(k, &m)| EdgeRecord::new("ego", format!("m{m}"), 60 * k as i64))
        .collect();
    for &(a, b) in pairs {
        recs.push(EdgeRecord::new(format!("m{a}"), format!("m{b}"), 0));
    }
    recs
}

/// Cliques of the given sizes on consecutive member indices, chained by one
/// bridge each.
pub fn clique_chain(sizes: &[usize]) -> (Vec<(usize, usize)>, Vec<usize>) {
    let mut pairs = Vec::new();
    let mut truth = Vec::new();
    let mut base = 0;
    for (c, &s) in sizes.iter().enumerate() {
        for a in base..base + s {
            truth.push(c);
            for b in a + 1..base + s {
                pairs.push((a, b));
            }
        }
        if c > 0 {
            pairs.push((base - 1, base));
        }
        base += s;
    }
    (pairs, truth)
}

/// A group whose treated members pick uniformly from `t_pool` candidates and
/// controls from `c_pool`, with candidate ids offset so the pools differ.
pub fn planted_group(r: &mut impl Rng, id: usize, arm: usize, t_pool: u32, c_pool: u32) -> MatchingGroup {
    let member = |r: &mut dyn rand::RngCore, treated: bool, k: usize| {
        let pool = if treated { t_pool } else { c_pool };
        GroupMember {
            ego: NodeId((id * 1000 + k) as u32),
            registered_at: 0,
            treated,
            next: NodeId(1_000_000 + r.random_range(0..pool)),
            after_next: None,
            next_has_cn: false,
        }
    };
    let members = (0..2 * arm).map(|k| member(r, k < arm, k)).collect();
    MatchingGroup {
        k: 1,
        prefix: vec![NodeId(id as u32)],
        bucket: 0,
        members,
    }
}

pub fn random_stream(r: &mut impl Rng, timeout: i64) -> Vec<(i64, bool)> {
    let len = r.random_range(0..40);
    let mut t = r.random_range(0..1_000_000i64);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push((t, r.random_bool(0.3)));
        t += match r.random_range(0..5) {
            0 => 0,
            1 => timeout - 1,
            2 => timeout,
            3 => timeout + 1,
            _ => r.random_range(0..3 * timeout),
        };
    }
    out
}
