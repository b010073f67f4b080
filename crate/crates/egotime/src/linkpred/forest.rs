//! Random forest of Gini classification trees.
//!
//! Features are discretised once per fit into at most `max_bins` bins whose
//! edges are midpoints between distinct training values; with no more
//! distinct values than bins this is exact. Trees are grown to purity on
//! bootstrap samples, trying `mtry` non-constant features per split.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::rng::{derive_seed, rng_for};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means `floor(sqrt(d))`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_bins: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry: None,
            min_leaf: 1,
            max_bins: 255,
        }
    }
}

/// Per-feature bin edges.
#[derive(Clone, Debug)]
pub(crate) struct Binner {
    cuts: Vec<Vec<f64>>,
}

impl Binner {
    /// `columns[f]` holds every training value of feature `f`.
    pub(crate) fn fit(columns: &[Vec<f64>], max_bins: usize) -> Self {
        let cuts = columns
            .iter()
            .map(|col| {
                let mut v = col.clone();
                v.sort_by(f64::total_cmp);
                let mut distinct: Vec<(f64, usize)> = Vec::new();
                for x in v {
                    match distinct.last_mut() {
                        Some(d) if d.0 == x => d.1 += 1,
                        _ => distinct.push((x, 1)),
                    }
                }
                let mid = |i: usize| distinct[i].0 + (distinct[i + 1].0 - distinct[i].0) / 2.0;
                if distinct.len() <= max_bins {
                    return (0..distinct.len().saturating_sub(1)).map(mid).collect();
                }
                let n = col.len() as f64;
                let mut out = Vec::new();
                let mut cum = 0usize;
                let mut next_q = 1;
                for i in 0..distinct.len() - 1 {
                    cum += distinct[i].1;
                    if cum as f64 >= next_q as f64 * n / max_bins as f64 {
                        out.push(mid(i));
                        while next_q < max_bins && cum as f64 >= next_q as f64 * n / max_bins as f64 {
                            next_q += 1;
                        }
                        if out.len() + 1 >= max_bins {
                            break;
                        }
                    }
                }
                out
            })
            .collect();
        Self { cuts }
    }

    #[inline]
    pub(crate) fn bin(&self, f: usize, x: f64) -> u8 {
        self.cuts[f].partition_point(|&c| c < x) as u8
    }

    fn n_bins(&self, f: usize) -> usize {
        self.cuts[f].len() + 1
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(f64),
    /// Rows with `bin <= threshold` go left.
    Split {
        feature: usize,
        threshold: u8,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, bins: &[u8]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(p) => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if bins[feature] <= threshold { left } else { right },
            }
        }
    }
}

/// `n * gini`, i.e. `2 p (n - p) / n`.
#[inline]
fn weighted_gini(n: f64, p: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        2.0 * p * (n - p) / n
    }
}

struct Builder<'a> {
    bins: &'a [Vec<u8>],
    y: &'a [bool],
    binner: &'a Binner,
    mtry: usize,
    min_leaf: usize,
}

struct Best {
    feature: usize,
    threshold: u8,
    gain: f64,
}

impl Builder<'_> {
    fn best_for_feature(&self, f: usize, idx: &[u32], parent: f64, scratch: &mut Vec<(u8, bool)>) -> Option<(u8, f64)> {
        let n = idx.len() as f64;
        let total_pos = idx.iter().filter(|&&i| self.y[i as usize]).count() as f64;
        let col = &self.bins[f];
        let mut best: Option<(u8, f64)> = None;
        let mut consider = |b: u8, ln: f64, lp: f64| {
            let rn = n - ln;
            if ln < self.min_leaf as f64 || rn < self.min_leaf as f64 {
                return;
            }
            let gain = parent - weighted_gini(ln, lp) - weighted_gini(rn, total_pos - lp);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((b, gain));
            }
        };
        if idx.len() < 64 {
            scratch.clear();
            scratch.extend(idx.iter().map(|&i| (col[i as usize], self.y[i as usize])));
            scratch.sort_unstable_by_key(|p| p.0);
            let (mut ln, mut lp) = (0.0, 0.0);
            for k in 0..scratch.len() - 1 {
                ln += 1.0;
                lp += scratch[k].1 as u8 as f64;
                if scratch[k].0 != scratch[k + 1].0 {
                    consider(scratch[k].0, ln, lp);
                }
            }
        } else {
            let nb = self.binner.n_bins(f);
            let mut tot = [0u32; 256];
            let mut pos = [0u32; 256];
            for &i in idx {
                let b = col[i as usize] as usize;
                tot[b] += 1;
                pos[b] += self.y[i as usize] as u32;
            }
            let (mut ln, mut lp) = (0.0, 0.0);
            for b in 0..nb.saturating_sub(1) {
                if tot[b] == 0 {
                    continue;
                }
                ln += tot[b] as f64;
                lp += pos[b] as f64;
                if ln < n {
                    consider(b as u8, ln, lp);
                }
            }
        }
        best
    }

    fn grow(&self, mut idx: Vec<u32>, rng: &mut impl Rng, importance: &mut [f64]) -> Tree {
        let d = self.bins.len();
        let mut nodes = vec![Node::Leaf(0.0)];
        // (node slot, start, end)
        let mut stack = vec![(0usize, 0usize, idx.len())];
        let mut features: Vec<usize> = (0..d).collect();
        let mut scratch = Vec::new();
        while let Some((slot, s, e)) = stack.pop() {
            let part = &mut idx[s..e];
            let n = part.len() as f64;
            let p = part.iter().filter(|&&i| self.y[i as usize]).count() as f64;
            nodes[slot] = Node::Leaf(if n > 0.0 { p / n } else { 0.0 });
            if p == 0.0 || p == n || part.len() < 2 * self.min_leaf {
                continue;
            }
            let parent = weighted_gini(n, p);
            features.shuffle(rng);
            let mut tried = 0;
            let mut best: Option<Best> = None;
            for &f in &features {
                if tried == self.mtry {
                    break;
                }
                let first = self.bins[f][part[0] as usize];
                if part.iter().all(|&i| self.bins[f][i as usize] == first) {
                    continue;
                }
                tried += 1;
                if let Some((threshold, gain)) = self.best_for_feature(f, part, parent, &mut scratch) {
                    if best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(Best {
                            feature: f,
                            threshold,
                            gain,
                        });
                    }
                }
            }
            let Some(best) = best else { continue };
            importance[best.feature] += best.gain.max(0.0);
            let col = &self.bins[best.feature];
            let mut k = 0;
            for j in 0..part.len() {
                if col[part[j] as usize] <= best.threshold {
                    part.swap(k, j);
                    k += 1;
                }
            }
            let left = nodes.len();
            nodes.push(Node::Leaf(0.0));
            nodes.push(Node::Leaf(0.0));
            nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left,
                right: left + 1,
            };
            stack.push((left + 1, s + k, e));
            stack.push((left, s, s + k));
        }
        Tree { nodes }
    }
}

#[derive(Clone, Debug)]
pub struct RandomForest {
    binner: Binner,
    trees: Vec<Tree>,
    importances: Vec<f64>,
}

impl RandomForest {
    /// Fits on row-major `x` with labels `y`.
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &ForestParams, seed: u64) -> Self {
        assert_eq!(x.len(), y.len());
        let d = x.first().map_or(0, |r| r.len());
        let columns: Vec<Vec<f64>> = (0..d).map(|f| x.iter().map(|r| r[f]).collect()).collect();
        let binner = Binner::fit(&columns, params.max_bins.clamp(2, 256));
        let bins: Vec<Vec<u8>> = columns
            .iter()
            .enumerate()
            .map(|(f, c)| c.iter().map(|&v| binner.bin(f, v)).collect())
            .collect();
        let builder = Builder {
            bins: &bins,
            y,
            binner: &binner,
            mtry: params.mtry.unwrap_or(((d as f64).sqrt().floor() as usize).max(1)).clamp(1, d.max(1)),
            min_leaf: params.min_leaf.max(1),
        };
        let n = x.len();
        let grown: Vec<(Tree, Vec<f64>)> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng_for(derive_seed(seed, t as u64), 0);
                let idx: Vec<u32> = (0..n).map(|_| rng.random_range(0..n) as u32).collect();
                let mut imp = vec![0.0; d];
                let tree = builder.grow(idx, &mut rng, &mut imp);
                let s: f64 = imp.iter().sum();
                if s > 0.0 {
                    imp.iter_mut().for_each(|v| *v /= s);
                }
                (tree, imp)
            })
            .collect();
        let mut importances = vec![0.0; d];
        for (_, imp) in &grown {
            for (a, b) in importances.iter_mut().zip(imp) {
                *a += b;
            }
        }
        let s: f64 = importances.iter().sum();
        if s > 0.0 {
            importances.iter_mut().for_each(|v| *v /= s);
        } else if d > 0 {
            importances.iter_mut().for_each(|v| *v = 1.0 / d as f64);
        }
        Self {
            binner,
            trees: grown.into_iter().map(|(t, _)| t).collect(),
            importances,
        }
    }

    /// Mean of the trees' leaf frequencies of the positive class.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let bins: Vec<u8> = row.iter().enumerate().map(|(f, &v)| self.binner.bin(f, v)).collect();
        let s: f64 = self.trees.iter().map(|t| t.predict(&bins)).sum();
        s / self.trees.len().max(1) as f64
    }

    /// Mean decrease in Gini impurity per feature, normalised to sum to 1.
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }
}
