//! All-pairs hop distance on small undirected graphs via bitset BFS.
//!
//! Each BFS level is the OR of the frontier's adjacency rows, so one source
//! costs O(n^2 / 64) words regardless of edge count. Ego-networks densify
//! quickly, which makes this cheaper than list-based BFS in practice.

use serde::Serialize;

/// Sum of hop distances and number of connected unordered pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DistanceStats {
    pub total: u64,
    pub pairs: u64,
}

impl DistanceStats {
    pub fn mean(&self) -> Option<f64> {
        (self.pairs > 0).then(|| self.total as f64 / self.pairs as f64)
    }
}

#[derive(Clone, Debug)]
pub(crate) struct BitAdjacency {
    words: usize,
    rows: Vec<u64>,
}

impl BitAdjacency {
    pub(crate) fn new(capacity: usize) -> Self {
        let words = capacity.div_ceil(64).max(1);
        Self {
            words,
            rows: vec![0; words * capacity],
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[u64] {
        &self.rows[i * self.words..(i + 1) * self.words]
    }

    pub(crate) fn link(&mut self, a: usize, b: usize) {
        let w = self.words;
        self.rows[a * w + b / 64] |= 1 << (b % 64);
        self.rows[b * w + a / 64] |= 1 << (a % 64);
    }

    /// Distances among nodes `0..n`, restricted to `mask` when given.
    pub(crate) fn mean_distance(&self, n: usize, mask: Option<&[bool]>) -> DistanceStats {
        let words = n.div_ceil(64);
        let mut visited = vec![0u64; words];
        let mut frontier = vec![0u64; words];
        let mut next = vec![0u64; words];
        let mut total = 0u64;
        let mut pairs = 0u64;
        for s in 0..n {
            if mask.is_some_and(|m| !m[s]) {
                continue;
            }
            visited.iter_mut().for_each(|w| *w = 0);
            frontier.iter_mut().for_each(|w| *w = 0);
            visited[s / 64] |= 1 << (s % 64);
            frontier[s / 64] |= 1 << (s % 64);
            let mut depth = 0u64;
            loop {
                depth += 1;
                next.iter_mut().for_each(|w| *w = 0);
                for (wi, &fw) in frontier.iter().enumerate() {
                    let mut bits = fw;
                    while bits != 0 {
                        let u = wi * 64 + bits.trailing_zeros() as usize;
                        bits &= bits - 1;
                        for (nw, rw) in next.iter_mut().zip(&self.row(u)[..words]) {
                            *nw |= rw;
                        }
                    }
                }
                let mut found = 0u64;
                for ((nw, vw), fw) in next.iter_mut().zip(visited.iter_mut()).zip(frontier.iter_mut()) {
                    *nw &= !*vw;
                    *vw |= *nw;
                    *fw = *nw;
                    found += nw.count_ones() as u64;
                }
                if found == 0 {
                    break;
                }
                total += depth * found;
                pairs += found;
            }
        }
        // Every unordered pair was counted from both ends.
        DistanceStats {
            total: total / 2,
            pairs: pairs / 2,
        }
    }
}

const INF: u32 = u32::MAX / 4;

/// All-pairs distances maintained under node and edge insertion.
///
/// Inserting `{a, b}` can only shorten pairs `(x, y)` with
/// `d(x, a) + 1 < d(x, b)` and `d(b, y) + 1 < d(a, y)`; only that product is
/// visited.
#[derive(Clone, Debug)]
pub(crate) struct IncrementalDistances {
    cap: usize,
    n: usize,
    d: Vec<u32>,
    stats: DistanceStats,
    xs: Vec<usize>,
    ys: Vec<usize>,
}

impl IncrementalDistances {
    pub(crate) fn new(capacity: usize) -> Self {
        Self {
            cap: capacity,
            n: 0,
            d: vec![INF; capacity * capacity],
            stats: DistanceStats::default(),
            xs: Vec::new(),
            ys: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self) -> usize {
        let v = self.n;
        self.d[v * self.cap + v] = 0;
        self.n += 1;
        v
    }

    pub(crate) fn stats(&self) -> DistanceStats {
        self.stats
    }

    pub(crate) fn link(&mut self, a: usize, b: usize) {
        let (cap, n) = (self.cap, self.n);
        if self.d[a * cap + b] <= 1 {
            return;
        }
        let d = &mut self.d;
        self.xs.clear();
        self.ys.clear();
        for x in 0..n {
            let (xa, xb) = (d[x * cap + a], d[x * cap + b]);
            if xa + 1 < xb {
                self.xs.push(x);
            } else if xb + 1 < xa {
                self.ys.push(x);
            }
        }
        for &x in &self.xs {
            let xa = d[x * cap + a];
            for &y in &self.ys {
                let cand = xa + 1 + d[b * cap + y];
                let old = d[x * cap + y];
                if cand < old {
                    if old >= INF {
                        self.stats.pairs += 1;
                    } else {
                        self.stats.total -= old as u64;
                    }
                    self.stats.total += cand as u64;
                    d[x * cap + y] = cand;
                    d[y * cap + x] = cand;
                }
            }
        }
    }
}

/// Mean hop distance over connected unordered pairs of an undirected graph on
/// nodes `0..n` given as index pairs.
pub fn mean_distance(n: usize, pairs: &[(usize, usize)]) -> DistanceStats {
    let mut adj = BitAdjacency::new(n);
    for &(a, b) in pairs {
        if a != b {
            adj.link(a, b);
        }
    }
    adj.mean_distance(n, None)
}
