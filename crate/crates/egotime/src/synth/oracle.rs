//! Brute-force audit of generator output against its config.
//!
//! Nothing here uses the analysis modules: sessions are found with an
//! explicit gap scan, the batch-size exponent by a grid search over a
//! directly summed likelihood, and common neighbors by replaying the stream
//! into plain adjacency sets.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use super::{Mechanism, SynthOutput};
use crate::timegraph::Timestamp;
use crate::DAY;

const TIMEOUT: Timestamp = 1500;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub edges: usize,
    pub recommended_fraction: f64,
    pub batches: usize,
    /// Batch-size exponent fitted at `x_min = 1`.
    pub batch_size_gamma: Option<f64>,
    /// Egos with at least two community-driven additions.
    pub community_egos: usize,
    /// Mean inversion score of the planted community rank sequences.
    pub mean_planted_inversion: Option<f64>,
    /// Fraction of those egos whose planted sequence has no inversion.
    pub in_depth_fraction: Option<f64>,
    pub mean_cn_recommended: Option<f64>,
    pub mean_cn_spontaneous: Option<f64>,
    pub max_daily_additions: usize,
}

impl OracleReport {
    pub fn cn_gap(&self) -> Option<f64> {
        Some(self.mean_cn_recommended? - self.mean_cn_spontaneous?)
    }
}

fn zeta_direct(s: f64) -> f64 {
    const K: usize = 20_000;
    let head: f64 = (1..=K).map(|k| (k as f64).powf(-s)).sum();
    // Tail by the integral with a half-term correction.
    let k = K as f64;
    head + k.powf(1.0 - s) / (s - 1.0) - 0.5 * k.powf(-s)
}

fn grid_exponent(samples: &[usize]) -> Option<f64> {
    if samples.len() < 50 || samples.iter().all(|&x| x == samples[0]) {
        return None;
    }
    let n = samples.len() as f64;
    let sum_ln: f64 = samples.iter().map(|&x| (x as f64).ln()).sum();
    let nll = |g: f64| n * zeta_direct(g).ln() + g * sum_ln;
    let mut best = (f64::INFINITY, 0.0);
    let mut g = 1.05;
    while g <= 4.0 {
        let v = nll(g);
        if v < best.0 {
            best = (v, g);
        }
        g += 0.005;
    }
    Some(best.1)
}

/// Planted rank sequence: communities ranked by the median (1-based)
/// position of their members; ties to the earlier first occurrence.
fn planted_inversion(labels: &[u32]) -> f64 {
    let mut comms: Vec<u32> = labels.to_vec();
    comms.sort_unstable();
    comms.dedup();
    let mut keys: Vec<(f64, usize, u32)> = comms
        .iter()
        .map(|&c| {
            let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).map(|i| i + 1).collect();
            let m = pos.len();
            let med = if m % 2 == 1 {
                pos[m / 2] as f64
            } else {
                (pos[m / 2 - 1] + pos[m / 2]) as f64 / 2.0
            };
            (med, pos[0], c)
        })
        .collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let rank: HashMap<u32, usize> = keys.iter().enumerate().map(|(r, k)| (k.2, r + 1)).collect();
    let r: Vec<usize> = labels.iter().map(|c| rank[c]).collect();
    let mut inv = 0usize;
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            inv += (r[i] > r[j]) as usize;
        }
    }
    let pairs = r.len() * (r.len() - 1) / 2;
    1.0 - 2.0 * inv as f64 / pairs as f64
}

pub fn oracle_report(out: &SynthOutput) -> OracleReport {
    let mechs = out.truth.mechanism_list();
    let edges = &out.edges;
    let parse = |s: &str| s.parse::<usize>().expect("generator labels are indices");

    // Sessions by explicit gap scan.
    let mut per_ego: BTreeMap<usize, Vec<Timestamp>> = BTreeMap::new();
    for e in edges {
        per_ego.entry(parse(&e.src)).or_default().push(e.created_at);
    }
    let mut sizes = Vec::new();
    let mut max_daily = 0;
    for ts in per_ego.values_mut() {
        ts.sort_unstable();
        let mut size = 1;
        for w in ts.windows(2) {
            if w[1] - w[0] >= TIMEOUT {
                sizes.push(size);
                size = 1;
            } else {
                size += 1;
            }
        }
        sizes.push(size);
        let mut daily: HashMap<i64, usize> = HashMap::new();
        for t in ts.iter() {
            *daily.entry(t.div_euclid(DAY)).or_default() += 1;
        }
        max_daily = max_daily.max(daily.values().copied().max().unwrap_or(0));
    }

    // Planted community order per ego.
    let mut comm_seq: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for (e, m) in edges.iter().zip(&mechs) {
        if *m == Mechanism::Community {
            comm_seq
                .entry(parse(&e.src))
                .or_default()
                .push(out.truth.node_community[parse(&e.dst)]);
        }
    }
    let scores: Vec<f64> = comm_seq
        .values()
        .filter(|s| s.len() >= 2)
        .map(|s| planted_inversion(s))
        .collect();

    // Common neighbors at creation, counting only strictly earlier edges.
    let mut outs: HashMap<usize, HashSet<usize>> = HashMap::new();
    let mut ins: HashMap<usize, HashSet<usize>> = HashMap::new();
    let (mut cn_r, mut n_r, mut cn_s, mut n_s) = (0usize, 0usize, 0usize, 0usize);
    let mut i = 0;
    while i < edges.len() {
        let mut j = i;
        while j < edges.len() && edges[j].created_at == edges[i].created_at {
            j += 1;
        }
        for e in &edges[i..j] {
            let (a, b) = (parse(&e.src), parse(&e.dst));
            let cn = match (outs.get(&a), ins.get(&b)) {
                (Some(o), Some(n)) => o.intersection(n).count(),
                _ => 0,
            };
            if e.origin.is_recommended() {
                cn_r += cn;
                n_r += 1;
            } else {
                cn_s += cn;
                n_s += 1;
            }
        }
        for e in &edges[i..j] {
            let (a, b) = (parse(&e.src), parse(&e.dst));
            outs.entry(a).or_default().insert(b);
            ins.entry(b).or_default().insert(a);
        }
        i = j;
    }
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);

    OracleReport {
        edges: edges.len(),
        recommended_fraction: ratio(n_r, edges.len()).unwrap_or(0.0),
        batches: sizes.len(),
        batch_size_gamma: grid_exponent(&sizes),
        community_egos: scores.len(),
        mean_planted_inversion: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
        in_depth_fraction: (!scores.is_empty())
            .then(|| scores.iter().filter(|&&s| s == 1.0).count() as f64 / scores.len() as f64),
        mean_cn_recommended: ratio(cn_r, n_r),
        mean_cn_spontaneous: ratio(cn_s, n_s),
        max_daily_additions: max_daily,
    }
}
