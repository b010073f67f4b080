//! Link prediction from a historical snapshot.
//!
//! Pairs `(i, j)` are sampled at a snapshot time `t` among candidates that
//! are not yet linked but have a directed path `i -> l -> j`. Each pair gets
//! six features computed from edges created no later than `t`, and a random
//! forest is evaluated on them with stratified cross-validation.

mod forest;
mod metrics;

use std::collections::{BinaryHeap, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use forest::{ForestParams, RandomForest};
pub use metrics::{auc, Confusion};

use crate::rng::{derive_seed, derive_seed_from, rng_for};
use crate::selection::pair_indicators;
use crate::stats::Moments;
use crate::timegraph::{Direction, NodeId, Snapshot, TimeGraph, Timestamp};
use crate::DAY;

pub const DEFAULT_PAIRS: usize = 20_000;
pub const DEFAULT_FOLDS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeatureRow {
    pub i: NodeId,
    pub j: NodeId,
    pub k_out_i: usize,
    pub k_in_j: usize,
    pub pa: u64,
    pub cn: usize,
    pub jaccard: f64,
    /// Days from the registration of `i` to the snapshot.
    pub age_i: f64,
    pub label: bool,
}

/// Features of `(i, j)` from edges created no later than `t`; unlabeled.
pub fn extract_features(g: &TimeGraph, i: NodeId, j: NodeId, t: Timestamp) -> FeatureRow {
    let s = pair_indicators(g, i, j, Snapshot::AtOrBefore(t));
    FeatureRow {
        i,
        j,
        k_out_i: s.ego_outdegree,
        k_in_j: s.alter_indegree,
        pa: s.pa,
        cn: s.cn,
        jaccard: s.jaccard,
        age_i: ((t - g.registered_at(i)).max(0)) as f64 / DAY as f64,
        label: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    KOutI,
    KInJ,
    Pa,
    Cn,
    Jaccard,
    AgeI,
}

impl Feature {
    pub const ALL: [Feature; 6] = [
        Feature::KOutI,
        Feature::KInJ,
        Feature::Pa,
        Feature::Cn,
        Feature::Jaccard,
        Feature::AgeI,
    ];
    pub const BASELINE: [Feature; 4] = [Feature::Pa, Feature::Cn, Feature::Jaccard, Feature::KInJ];
    pub const BASELINE_AGE: [Feature; 5] = [Feature::Pa, Feature::Cn, Feature::Jaccard, Feature::KInJ, Feature::AgeI];
    pub const BASELINE_KOUT: [Feature; 5] = [Feature::Pa, Feature::Cn, Feature::Jaccard, Feature::KInJ, Feature::KOutI];

    pub fn name(self) -> &'static str {
        match self {
            Feature::KOutI => "k_out_i",
            Feature::KInJ => "k_in_j",
            Feature::Pa => "pa",
            Feature::Cn => "cn",
            Feature::Jaccard => "jaccard",
            Feature::AgeI => "age_i",
        }
    }

    pub fn parse(s: &str) -> Option<Feature> {
        Feature::ALL.into_iter().find(|f| f.name() == s)
    }

    pub fn value(self, r: &FeatureRow) -> f64 {
        match self {
            Feature::KOutI => r.k_out_i as f64,
            Feature::KInJ => r.k_in_j as f64,
            Feature::Pa => r.pa as f64,
            Feature::Cn => r.cn as f64,
            Feature::Jaccard => r.jaccard,
            Feature::AgeI => r.age_i,
        }
    }
}

/// Named feature sets used for ablations.
pub fn feature_set(name: &str) -> Option<Vec<Feature>> {
    Some(match name {
        "baseline" => Feature::BASELINE.to_vec(),
        "baseline+age" => Feature::BASELINE_AGE.to_vec(),
        "baseline+kout" => Feature::BASELINE_KOUT.to_vec(),
        "all" => Feature::ALL.to_vec(),
        _ => return None,
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("need {needed} {class} pairs but only {available} candidates exist")]
    InsufficientCandidates {
        class: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("the graph has no recommended links")]
    NoRecommendedLinks,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Setting {
    /// Spontaneous future links against recommended future links.
    A,
    /// As `A`, plus as many never-connected pairs among the negatives.
    B,
}

fn priority(seed: u64, salt: u64, i: NodeId, j: NodeId) -> u64 {
    derive_seed_from(seed, [salt, i.0 as u64, j.0 as u64])
}

/// `i -> j` is absent at `t` and some `l` has `i -> l -> j` at `t`.
pub fn is_candidate(g: &TimeGraph, i: NodeId, j: NodeId, t: Timestamp) -> bool {
    let snap = Snapshot::AtOrBefore(t);
    i != j && !g.has_edge_in(i, j, snap) && g.common_neighbors(i, j, snap) > 0
}

/// Candidate pairs first linked in `(t, until]`, with the origin of that link.
fn future_links(g: &TimeGraph, t: Timestamp, until: Timestamp) -> Vec<(NodeId, NodeId, bool)> {
    let start = g.edges().partition_point(|e| e.created_at <= t);
    let end = g.edges().partition_point(|e| e.created_at <= until);
    g.edges()[start..end]
        .par_iter()
        .filter(|e| {
            g.edge_between(e.src, e.dst)
                .is_some_and(|first| g.edge(first).created_at == e.created_at)
                && is_candidate(g, e.src, e.dst, t)
        })
        .map(|e| (e.src, e.dst, e.origin.is_recommended()))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<HashSet<_>>()
        .into_iter()
        .collect()
}

fn take_lowest(
    mut pairs: Vec<(NodeId, NodeId)>,
    n: usize,
    class: &'static str,
    seed: u64,
    salt: u64,
) -> Result<Vec<(NodeId, NodeId)>, SampleError> {
    if pairs.len() < n {
        return Err(SampleError::InsufficientCandidates {
            class,
            needed: n,
            available: pairs.len(),
        });
    }
    pairs.sort_unstable_by_key(|&(i, j)| (priority(seed, salt, i, j), i, j));
    pairs.truncate(n);
    pairs.sort_unstable();
    Ok(pairs)
}

/// Uniform sample without replacement of `n` candidates at `t` that are
/// never linked in the whole data, by lowest hash priority.
fn never_connected(g: &TimeGraph, t: Timestamp, n: usize, seed: u64, salt: u64) -> Result<Vec<(NodeId, NodeId)>, SampleError> {
    let snap = Snapshot::AtOrBefore(t);
    let sources: Vec<NodeId> = g.nodes().filter(|&i| !g.out_edges_in(i, snap).is_empty()).collect();
    let per_source: Vec<(usize, Vec<(u64, NodeId, NodeId)>)> = sources
        .par_iter()
        .map(|&i| {
            let friends: HashSet<NodeId> = g.neighbors_in(i, snap, Direction::Out).collect();
            let mut seen = HashSet::new();
            let mut count = 0;
            let mut heap: BinaryHeap<(u64, NodeId, NodeId)> = BinaryHeap::new();
            for &l in &friends {
                for j in g.neighbors_in(l, snap, Direction::Out) {
                    if j == i || friends.contains(&j) || !seen.insert(j) || g.edge_between(i, j).is_some() {
                        continue;
                    }
                    count += 1;
                    let key = (priority(seed, salt, i, j), i, j);
                    if heap.len() < n {
                        heap.push(key);
                    } else if heap.peek().is_some_and(|top| key < *top) {
                        heap.pop();
                        heap.push(key);
                    }
                }
            }
            (count, heap.into_vec())
        })
        .collect();
    let available: usize = per_source.iter().map(|p| p.0).sum();
    if available < n {
        return Err(SampleError::InsufficientCandidates {
            class: "never-connected",
            needed: n,
            available,
        });
    }
    let mut all: Vec<(u64, NodeId, NodeId)> = per_source.into_iter().flat_map(|p| p.1).collect();
    all.sort_unstable();
    let mut out: Vec<(NodeId, NodeId)> = all.into_iter().take(n).map(|(_, i, j)| (i, j)).collect();
    out.sort_unstable();
    Ok(out)
}

fn rows(g: &TimeGraph, t: Timestamp, pairs: &[(NodeId, NodeId)], label: bool) -> Vec<FeatureRow> {
    pairs
        .par_iter()
        .map(|&(i, j)| FeatureRow {
            label,
            ..extract_features(g, i, j, t)
        })
        .collect()
}

const SALT_POS: u64 = 1;
const SALT_NEG: u64 = 2;
const SALT_REC: u64 = 3;

/// Balanced future-link dataset: `n_pairs / 2` candidates first linked in
/// `(t, horizon]` (label true) and as many never linked (label false).
pub fn sample_pairs(
    g: &TimeGraph,
    t: Timestamp,
    horizon: Timestamp,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<FeatureRow>, SampleError> {
    let half = n_pairs / 2;
    let pos: Vec<(NodeId, NodeId)> = future_links(g, t, horizon).into_iter().map(|(i, j, _)| (i, j)).collect();
    let pos = take_lowest(pos, half, "future-link", seed, SALT_POS)?;
    let neg = never_connected(g, t, half, seed, SALT_NEG)?;
    let mut out = rows(g, t, &pos, true);
    out.extend(rows(g, t, &neg, false));
    Ok(out)
}

/// Spontaneous-vs-recommended dataset at `t`: `n_per_class` candidates later
/// linked spontaneously (label true) against `n_per_class` later linked by
/// recommendation, plus `n_per_class` never-connected pairs in setting B.
pub fn sample_pairs_recommended(
    g: &TimeGraph,
    t: Timestamp,
    n_per_class: usize,
    setting: Setting,
    seed: u64,
) -> Result<Vec<FeatureRow>, SampleError> {
    if !g.edges().iter().any(|e| e.origin.is_recommended()) {
        return Err(SampleError::NoRecommendedLinks);
    }
    let future = future_links(g, t, Timestamp::MAX);
    let spont: Vec<_> = future.iter().filter(|f| !f.2).map(|f| (f.0, f.1)).collect();
    let rec: Vec<_> = future.iter().filter(|f| f.2).map(|f| (f.0, f.1)).collect();
    let pos = take_lowest(spont, n_per_class, "spontaneous", seed, SALT_POS)?;
    let neg = take_lowest(rec, n_per_class, "recommended", seed, SALT_REC)?;
    let mut out = rows(g, t, &pos, true);
    out.extend(rows(g, t, &neg, false));
    if setting == Setting::B {
        let extra = never_connected(g, t, n_per_class, seed, SALT_NEG)?;
        out.extend(rows(g, t, &extra, false));
    }
    Ok(out)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrainError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("at least 2 folds are needed")]
    TooFewFolds,
    #[error("the smaller class has {0} rows, fewer than the fold count")]
    TooFewRows(usize),
    #[error("empty feature set")]
    NoFeatures,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeatureImportance {
    pub feature: Feature,
    pub importance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows: usize,
    pub folds: usize,
    pub features: Vec<Feature>,
    /// Mean over folds.
    pub auc: f64,
    pub fold_auc: Vec<f64>,
    /// Positive-class F1 at threshold 0.5, mean over folds.
    pub f_score: f64,
    pub accuracy_positive: f64,
    pub accuracy_negative: f64,
    pub importances: Vec<FeatureImportance>,
}

impl EvalReport {
    /// Features ordered by decreasing importance.
    pub fn importance_ranking(&self) -> Vec<Feature> {
        let mut v = self.importances.clone();
        v.sort_by(|a, b| b.importance.total_cmp(&a.importance));
        v.into_iter().map(|f| f.feature).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub folds: usize,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            folds: DEFAULT_FOLDS,
            forest: ForestParams::default(),
            seed: 0,
        }
    }
}

/// Fold of each row; each class is shuffled and dealt round-robin.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_for(seed, 0xF01D);
    let mut fold = vec![0; labels.len()];
    for class in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            fold[i] = k % folds;
        }
    }
    fold
}

/// Stratified k-fold evaluation of a random forest on `features`.
pub fn train_eval(rows: &[FeatureRow], features: &[Feature], opts: &EvalOptions) -> Result<EvalReport, TrainError> {
    if features.is_empty() {
        return Err(TrainError::NoFeatures);
    }
    if opts.folds < 2 {
        return Err(TrainError::TooFewFolds);
    }
    let y: Vec<bool> = rows.iter().map(|r| r.label).collect();
    let n_pos = y.iter().filter(|&&l| l).count();
    let minority = n_pos.min(y.len() - n_pos);
    if minority == 0 {
        return Err(TrainError::SingleClass);
    }
    if minority < opts.folds {
        return Err(TrainError::TooFewRows(minority));
    }
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| features.iter().map(|f| f.value(r)).collect())
        .collect();
    let fold = stratified_folds(&y, opts.folds, opts.seed);
    let mut fold_auc = Vec::with_capacity(opts.folds);
    let (mut f1, mut acc_p, mut acc_n) = (Moments::default(), Moments::default(), Moments::default());
    let mut importance = vec![0.0; features.len()];
    for k in 0..opts.folds {
        let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, row) in x.iter().enumerate() {
            if fold[i] == k {
                vx.push(row.clone());
                vy.push(y[i]);
            } else {
                tx.push(row.clone());
                ty.push(y[i]);
            }
        }
        let model = RandomForest::fit(&tx, &ty, &opts.forest, derive_seed(opts.seed, k as u64));
        let scores: Vec<f64> = vx.iter().map(|r| model.predict_proba(r)).collect();
        fold_auc.push(auc(&scores, &vy).expect("stratified folds hold both classes"));
        let c = Confusion::at(&scores, &vy, 0.5);
        f1.push(c.f1());
        acc_p.push(c.accuracy_positive().unwrap_or(0.0));
        acc_n.push(c.accuracy_negative().unwrap_or(0.0));
        for (a, b) in importance.iter_mut().zip(model.importances()) {
            *a += b;
        }
    }
    let s: f64 = importance.iter().sum();
    Ok(EvalReport {
        rows: rows.len(),
        folds: opts.folds,
        features: features.to_vec(),
        auc: fold_auc.iter().sum::<f64>() / opts.folds as f64,
        fold_auc,
        f_score: f1.mean().unwrap_or(0.0),
        accuracy_positive: acc_p.mean().unwrap_or(0.0),
        accuracy_negative: acc_n.mean().unwrap_or(0.0),
        importances: features
            .iter()
            .zip(&importance)
            .map(|(&feature, &v)| FeatureImportance {
                feature,
                importance: if s > 0.0 { v / s } else { 1.0 / features.len() as f64 },
            })
            .collect(),
    })
}

/// Writes `i,j,k_out_i,k_in_j,pa,cn,jaccard,age_i,label`.
pub fn write_rows<W: Write>(g: &TimeGraph, rows: &[FeatureRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "k_out_i", "k_in_j", "pa", "cn", "jaccard", "age_i", "label"])?;
    for r in rows {
        w.write_record([
            g.label(r.i).to_string(),
            g.label(r.j).to_string(),
            r.k_out_i.to_string(),
            r.k_in_j.to_string(),
            r.pa.to_string(),
            r.cn.to_string(),
            format!("{}", r.jaccard),
            format!("{}", r.age_i),
            (r.label as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timegraph::{EdgeRecord, NodeMeta, Origin};

    fn graph(edges: &[(&str, &str, i64, Origin)]) -> TimeGraph {
        TimeGraph::load(
            edges.iter().map(|&(s, d, t, o)| EdgeRecord::new(s, d, t).with_origin(o)),
            vec![],
            true,
        )
        .unwrap()
        .0
    }

    #[test]
    fn fresh_node_features_are_zero() {
        let g = TimeGraph::load(
            vec![EdgeRecord::new("x", "y", 50)],
            vec![NodeMeta {
                node: "i".into(),
                registered_at: 10,
            }],
            true,
        )
        .unwrap()
        .0;
        let r = extract_features(&g, g.node_id("i").unwrap(), g.node_id("y").unwrap(), 10);
        assert_eq!((r.k_out_i, r.pa, r.cn, r.jaccard, r.age_i), (0, 0, 0, 0.0, 0.0));
    }

    #[test]
    fn no_paths_means_no_candidates() {
        let s = Origin::Spontaneous;
        let g = graph(&[("a", "b", 1, s), ("c", "d", 2, s), ("a", "d", 5, s)]);
        assert_eq!(
            sample_pairs(&g, 2, 10, 2, 0),
            Err(SampleError::InsufficientCandidates {
                class: "future-link",
                needed: 1,
                available: 0
            })
        );
        assert_eq!(
            sample_pairs_recommended(&g, 2, 1, Setting::A, 0),
            Err(SampleError::NoRecommendedLinks)
        );
    }

    #[test]
    fn single_class_rejected() {
        let r = FeatureRow {
            i: NodeId(0),
            j: NodeId(1),
            k_out_i: 1,
            k_in_j: 1,
            pa: 1,
            cn: 0,
            jaccard: 0.0,
            age_i: 0.0,
            label: true,
        };
        assert_eq!(train_eval(&[r; 30], &Feature::ALL, &EvalOptions::default()), Err(TrainError::SingleClass));
    }

    #[test]
    fn folds_are_stratified() {
        let y: Vec<bool> = (0..103).map(|i| i % 3 == 0).collect();
        let f = stratified_folds(&y, 10, 7);
        for k in 0..10 {
            let pos = (0..y.len()).filter(|&i| f[i] == k && y[i]).count();
            assert!((3..=4).contains(&pos));
        }
    }
}
