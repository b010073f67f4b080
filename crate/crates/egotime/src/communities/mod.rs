//! Communities inside final ego-networks and the order in which an ego
//! explores them.
//!
//! Each final ego-network is partitioned with Louvain on its undirected
//! projection. Replacing every member by its community and ranking the
//! communities by the median position at which their members were added gives
//! the rank sequence `R`; its inversion score is 1 when communities are
//! explored one after another and near 0 when the order looks random.

mod louvain;

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use louvain::modularity;

use crate::egonet::{final_ego_network, EgoNetwork};
use crate::rng::{derive_seed, rng_for};
use crate::stats::{quantile_sorted, MeanCi, Moments, Z95};
use crate::timegraph::{NodeId, TimeGraph};

/// Ego-networks smaller than this are not partitioned.
pub const MIN_MEMBERS: usize = 5;
/// Fewest shuffles accepted by [`null_model`].
pub const MIN_SHUFFLES: usize = 1000;
pub const DEFAULT_SHUFFLES: usize = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CommunityError {
    #[error("ego-network has {0} members, need at least {MIN_MEMBERS}")]
    TooSmall(usize),
    #[error("sequence has {0} elements, need at least 2")]
    TooShort(usize),
    #[error("{0} shuffles requested, need at least {MIN_SHUFFLES}")]
    TooFewShuffles(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommunityPartition {
    pub ego: NodeId,
    /// Members in addition order.
    pub members: Vec<NodeId>,
    /// Community of each member, numbered by first appearance in `members`.
    pub labels: Vec<usize>,
    pub n_communities: usize,
    pub modularity: f64,
}

impl CommunityPartition {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_communities];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

/// Louvain partition of the undirected projection of `eg`.
pub fn detect_communities(eg: &EgoNetwork, seed: u64) -> Result<CommunityPartition, CommunityError> {
    if eg.len() < MIN_MEMBERS {
        return Err(CommunityError::TooSmall(eg.len()));
    }
    let pairs = eg.undirected_pairs();
    let mut rng = rng_for(seed, eg.ego.0 as u64);
    let labels = louvain::louvain(eg.len(), &pairs, &mut rng);
    let n_communities = labels.iter().copied().max().map_or(0, |m| m + 1);
    Ok(CommunityPartition {
        ego: eg.ego,
        members: eg.members.clone(),
        modularity: modularity(eg.len(), &pairs, &labels),
        labels,
        n_communities,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RankSequence {
    /// Rank (from 1) of the community of each position.
    pub ranks: Vec<usize>,
    /// `community_order[r - 1]` is the community label with rank `r`.
    pub community_order: Vec<usize>,
}

/// Ranks communities by the median (1-based) position of their members in
/// `labels`; equal medians go to the community seen first.
pub fn rank_sequence(labels: &[usize]) -> RankSequence {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut positions: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        positions[l].push(i + 1);
    }
    // (twice the median, first position, label)
    let mut keys: Vec<(usize, usize, usize)> = positions
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_empty())
        .map(|(l, p)| {
            let m = p.len();
            let doubled = if m % 2 == 1 { 2 * p[m / 2] } else { p[m / 2 - 1] + p[m / 2] };
            (doubled, p[0], l)
        })
        .collect();
    keys.sort_unstable();
    let mut rank_of = vec![0; k];
    for (r, &(_, _, l)) in keys.iter().enumerate() {
        rank_of[l] = r + 1;
    }
    RankSequence {
        ranks: labels.iter().map(|&l| rank_of[l]).collect(),
        community_order: keys.into_iter().map(|(_, _, l)| l).collect(),
    }
}

/// Number of pairs `i < j` with `xs[i] > xs[j]`, by merge sort.
pub fn count_inversions(xs: &[usize]) -> u64 {
    fn sort(v: &mut [usize], buf: &mut Vec<usize>) -> u64 {
        let n = v.len();
        if n < 2 {
            return 0;
        }
        let mid = n / 2;
        let mut inv = sort(&mut v[..mid], buf) + sort(&mut v[mid..], buf);
        buf.clear();
        let (mut i, mut j) = (0, mid);
        while i < mid && j < n {
            if v[i] <= v[j] {
                buf.push(v[i]);
                i += 1;
            } else {
                buf.push(v[j]);
                inv += (mid - i) as u64;
                j += 1;
            }
        }
        buf.extend_from_slice(&v[i..mid]);
        buf.extend_from_slice(&v[j..n]);
        v.copy_from_slice(buf);
        inv
    }
    let mut v = xs.to_vec();
    sort(&mut v, &mut Vec::with_capacity(xs.len()))
}

fn pairs(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// `1 - 2 inv(L) / C(|L|, 2)`.
pub fn inversion_score(l: &[usize]) -> Result<f64, CommunityError> {
    if l.len() < 2 {
        return Err(CommunityError::TooShort(l.len()));
    }
    Ok(1.0 - 2.0 * count_inversions(l) as f64 / pairs(l.len()))
}

/// Expected inversion score of a uniform shuffle of `l`: `1 - D / C(|L|, 2)`
/// where `D` counts position pairs holding different values.
pub fn exact_null_mean(l: &[usize]) -> Result<f64, CommunityError> {
    if l.len() < 2 {
        return Err(CommunityError::TooShort(l.len()));
    }
    let mut counts = std::collections::HashMap::new();
    for &x in l {
        *counts.entry(x).or_insert(0usize) += 1;
    }
    let same: f64 = counts.values().map(|&c| pairs(c)).sum();
    let total = pairs(l.len());
    Ok(1.0 - (total - same) / total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NullModel {
    pub shuffles: usize,
    pub mean: f64,
    pub std: f64,
    /// 2.5% and 97.5% percentiles of the shuffled scores.
    pub lo: f64,
    pub hi: f64,
}

impl NullModel {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Inversion scores of `n_shuffles` uniform permutations of `l`.
pub fn null_model(l: &[usize], n_shuffles: usize, seed: u64) -> Result<NullModel, CommunityError> {
    if l.len() < 2 {
        return Err(CommunityError::TooShort(l.len()));
    }
    if n_shuffles < MIN_SHUFFLES {
        return Err(CommunityError::TooFewShuffles(n_shuffles));
    }
    let mut rng = rng_for(seed, l.len() as u64);
    let mut v = l.to_vec();
    let mut scores: Vec<f64> = (0..n_shuffles)
        .map(|_| {
            v.shuffle(&mut rng);
            1.0 - 2.0 * count_inversions(&v) as f64 / pairs(v.len())
        })
        .collect();
    let m: Moments = scores.iter().copied().collect();
    scores.sort_by(f64::total_cmp);
    Ok(NullModel {
        shuffles: n_shuffles,
        mean: m.mean().unwrap_or(0.0),
        std: m.variance().unwrap_or(0.0).sqrt(),
        lo: quantile_sorted(&scores, 0.025).unwrap_or(0.0),
        hi: quantile_sorted(&scores, 0.975).unwrap_or(0.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LikelihoodCell {
    pub n: usize,
    pub k: usize,
    /// Sequences long enough to have a position `n`.
    pub sequences: usize,
    pub observed: f64,
    /// Probability that a uniformly reshuffled sequence has rank `k` at `n`.
    pub null: f64,
    pub ratio: f64,
    pub ratio_lo: f64,
    pub ratio_hi: f64,
}

/// `P(R[n] = k) / P_null(R[n] = k)` pooled over sequences, for `n <= n_max`
/// and `k <= k_max`. Under reshuffling, position `n` of a sequence of length
/// `m` holds rank `k` with probability `count_k / m`, so the null is exact.
/// The interval is the normal-approximation binomial interval on the
/// observed probability divided by the null.
pub fn membership_likelihood(sequences: &[&[usize]], n_max: usize, k_max: usize) -> Vec<LikelihoodCell> {
    let freqs: Vec<Vec<f64>> = sequences
        .iter()
        .map(|s| {
            let mut c = vec![0.0; k_max + 1];
            for &r in s.iter() {
                if r <= k_max {
                    c[r] += 1.0;
                }
            }
            c.iter().map(|x| x / s.len() as f64).collect()
        })
        .collect();
    let mut out = Vec::new();
    for n in 1..=n_max {
        let live: Vec<usize> = (0..sequences.len()).filter(|&i| sequences[i].len() >= n).collect();
        if live.is_empty() {
            break;
        }
        let total = live.len() as f64;
        for k in 1..=k_max {
            let null = live.iter().map(|&i| freqs[i][k]).sum::<f64>() / total;
            if null == 0.0 {
                continue;
            }
            let hits = live.iter().filter(|&&i| sequences[i][n - 1] == k).count() as f64;
            let p = hits / total;
            let hw = Z95 * (p * (1.0 - p) / total).sqrt();
            out.push(LikelihoodCell {
                n,
                k,
                sequences: live.len(),
                observed: p,
                null,
                ratio: p / null,
                ratio_lo: (p - hw) / null,
                ratio_hi: (p + hw) / null,
            });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankSize {
    pub rank: usize,
    pub size: MeanCi,
}

/// Mean community size per rank. The size of rank `k` is the number of
/// positions of the sequence holding `k`.
pub fn size_by_rank(sequences: &[&[usize]], k_max: usize) -> Vec<RankSize> {
    let mut acc = vec![Moments::default(); k_max + 1];
    for s in sequences {
        let mut c = vec![0usize; k_max + 1];
        for &r in s.iter() {
            if r <= k_max {
                c[r] += 1;
            }
        }
        for (k, &n) in c.iter().enumerate().skip(1) {
            if n > 0 {
                acc[k].push(n as f64);
            }
        }
    }
    acc.iter()
        .enumerate()
        .skip(1)
        .filter_map(|(rank, m)| m.ci().map(|size| RankSize { rank, size }))
        .collect()
}

/// Per-ego outcome of the community pipeline.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EgoCommunities {
    pub ego: NodeId,
    pub partition: CommunityPartition,
    pub sequence: RankSequence,
    pub inversion: f64,
    pub null: NullModel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CommunityOptions {
    pub seed: u64,
    pub shuffles: usize,
}

impl Default for CommunityOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            shuffles: DEFAULT_SHUFFLES,
        }
    }
}

/// Runs detection, ranking and the null model for one ego.
pub fn analyze_ego(eg: &EgoNetwork, opts: &CommunityOptions) -> Result<EgoCommunities, CommunityError> {
    let partition = detect_communities(eg, opts.seed)?;
    let sequence = rank_sequence(&partition.labels);
    let inversion = inversion_score(&sequence.ranks)?;
    let null = null_model(&sequence.ranks, opts.shuffles, derive_seed(opts.seed, eg.ego.0 as u64))?;
    Ok(EgoCommunities {
        ego: eg.ego,
        partition,
        sequence,
        inversion,
        null,
    })
}

/// Analyses the final ego-network of each ego with at least
/// [`MIN_MEMBERS`] members, in parallel; results follow `egos` order.
pub fn analyze_communities(g: &TimeGraph, egos: &[NodeId], opts: &CommunityOptions) -> Vec<EgoCommunities> {
    egos.par_iter()
        .filter_map(|&ego| {
            if g.out_edges(ego).len() < MIN_MEMBERS {
                return None;
            }
            analyze_ego(&final_ego_network(g, ego), opts).ok()
        })
        .collect()
}

/// Writes `ego,n,community_rank`.
pub fn write_rank_rows<W: Write>(g: &TimeGraph, results: &[EgoCommunities], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ego", "n", "community_rank"])?;
    for r in results {
        for (i, rank) in r.sequence.ranks.iter().enumerate() {
            w.write_record([g.label(r.ego).to_string(), (i + 1).to_string(), rank.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EgoCommunitySummary {
    pub ego: String,
    pub n_communities: usize,
    pub modularity: f64,
    pub inversion: f64,
    pub null_mean: f64,
    pub null_ci: [f64; 2],
}

pub fn summaries(g: &TimeGraph, results: &[EgoCommunities]) -> Vec<EgoCommunitySummary> {
    results
        .iter()
        .map(|r| EgoCommunitySummary {
            ego: g.label(r.ego).to_string(),
            n_communities: r.partition.n_communities,
            modularity: r.partition.modularity,
            inversion: r.inversion,
            null_mean: r.null.mean,
            null_ci: [r.null.lo, r.null.hi],
        })
        .collect()
}
