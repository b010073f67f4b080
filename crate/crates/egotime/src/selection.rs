//! Popularity and similarity of each new neighbor at the instant it is added.
//!
//! For a link `ego -> alter` created at `t`, every indicator is evaluated on
//! the graph of edges created strictly before `t`, so the link never counts
//! itself.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::egonet::{AggregateError, AggregateRow, Cohort, OriginSplit};
use crate::stats::{LogHistogram, Moments};
use crate::timegraph::{Direction, NodeId, Origin, Snapshot, TimeGraph, Timestamp};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectionError {
    #[error("no edge {0} -> {1}")]
    MissingEdge(NodeId, NodeId),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SelectionIndicators {
    /// `|Γ_out(ego) ∩ Γ_in(alter)|`.
    pub cn: usize,
    /// `cn / |Γ_out(ego) ∪ Γ_in(alter)|`, zero when both sets are empty.
    pub jaccard: f64,
    /// `k_out(ego) * k_in(alter)`.
    pub pa: u64,
    pub alter_indegree: usize,
    pub ego_outdegree: usize,
}

/// Indicators of the pair `(i, j)` in an arbitrary snapshot.
pub fn pair_indicators(g: &TimeGraph, i: NodeId, j: NodeId, snap: Snapshot) -> SelectionIndicators {
    let kout = g.degree_in(i, snap, Direction::Out);
    let kin = g.degree_in(j, snap, Direction::In);
    let cn = g.common_neighbors(i, j, snap);
    let union = kout + kin - cn;
    SelectionIndicators {
        cn,
        jaccard: if union == 0 { 0.0 } else { cn as f64 / union as f64 },
        pa: kout as u64 * kin as u64,
        alter_indegree: kin,
        ego_outdegree: kout,
    }
}

/// Indicators for the existing link `ego -> alter`, using edges created
/// strictly before it.
pub fn indicators_at_addition(
    g: &TimeGraph,
    ego: NodeId,
    alter: NodeId,
) -> Result<SelectionIndicators, SelectionError> {
    let e = g
        .edge_between(ego, alter)
        .ok_or(SelectionError::MissingEdge(ego, alter))?;
    Ok(pair_indicators(g, ego, alter, Snapshot::Before(g.edge(e).created_at)))
}

/// Indicators of the `n`-th addition to one ego-network.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelectionRow {
    pub ego: NodeId,
    pub n: usize,
    pub alter: NodeId,
    pub added_at: Timestamp,
    pub origin: Origin,
    #[serde(flatten)]
    pub indicators: SelectionIndicators,
}

/// One row per link of each ego (in creation order), computed in parallel
/// over egos and returned in node order.
pub fn selection_table(g: &TimeGraph, egos: &[NodeId]) -> Vec<SelectionRow> {
    egos.par_iter()
        .flat_map_iter(|&ego| {
            let mut seen = std::collections::HashSet::new();
            g.out_edges(ego)
                .iter()
                .map(|&e| *g.edge(e))
                .filter(move |e| seen.insert(e.dst))
                .enumerate()
                .map(move |(k, e)| SelectionRow {
                    ego,
                    n: k + 1,
                    alter: e.dst,
                    added_at: e.created_at,
                    origin: e.origin,
                    indicators: pair_indicators(g, ego, e.dst, Snapshot::Before(e.created_at)),
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Every ego with at least one out-link.
pub fn all_egos(g: &TimeGraph) -> Vec<NodeId> {
    g.nodes().filter(|&n| !g.out_edges(n).is_empty()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Cn,
    Jaccard,
    Pa,
    AlterIndegree,
}

impl Indicator {
    pub const ALL: [Indicator; 4] = [
        Indicator::Cn,
        Indicator::Jaccard,
        Indicator::Pa,
        Indicator::AlterIndegree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Indicator::Cn => "cn",
            Indicator::Jaccard => "jaccard",
            Indicator::Pa => "pa",
            Indicator::AlterIndegree => "alter_indegree",
        }
    }

    pub fn parse(s: &str) -> Option<Indicator> {
        Indicator::ALL.into_iter().find(|m| m.name() == s)
    }

    pub fn value(self, s: &SelectionIndicators) -> f64 {
        match self {
            Indicator::Cn => s.cn as f64,
            Indicator::Jaccard => s.jaccard,
            Indicator::Pa => s.pa as f64,
            Indicator::AlterIndegree => s.alter_indegree as f64,
        }
    }
}

/// Per-`n` mean and CI of one indicator. With `Cohort::ReachedNMax` only egos
/// with at least `n_max` links contribute.
pub fn indicator_profile(
    rows: &[SelectionRow],
    metric: Indicator,
    n_max: usize,
    cohort: Cohort,
    split: OriginSplit,
) -> Result<Vec<AggregateRow>, AggregateError> {
    let mut final_size: HashMap<NodeId, usize> = HashMap::new();
    for r in rows {
        let e = final_size.entry(r.ego).or_default();
        *e = (*e).max(r.n);
    }
    let mut acc = vec![Moments::default(); n_max + 1];
    let mut any = false;
    for r in rows {
        if cohort == Cohort::ReachedNMax && final_size[&r.ego] < n_max {
            continue;
        }
        any = true;
        if r.n <= n_max && split.admits(r.origin) {
            acc[r.n].push(metric.value(&r.indicators));
        }
    }
    if !any {
        return Err(AggregateError::EmptyCohort);
    }
    Ok(acc
        .iter()
        .enumerate()
        .filter_map(|(n, m)| m.ci().map(|value| AggregateRow { n, value }))
        .collect())
}

/// Log-binned distribution (10 bins per decade) of an indicator over rows
/// admitted by `split`. Zeros land in `non_positive`.
pub fn indicator_distribution(rows: &[SelectionRow], metric: Indicator, split: OriginSplit) -> LogHistogram {
    LogHistogram::build(
        rows.iter()
            .filter(|r| split.admits(r.origin))
            .map(|r| metric.value(&r.indicators)),
        LogHistogram::DEFAULT_BINS_PER_DECADE,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timegraph::EdgeRecord;

    fn graph(edges: &[(&str, &str, Timestamp)]) -> TimeGraph {
        TimeGraph::load(
            edges.iter().map(|&(s, d, t)| EdgeRecord::new(s, d, t)),
            vec![],
            true,
        )
        .unwrap()
        .0
    }

    #[test]
    fn first_link_to_fresh_alter() {
        let g = graph(&[("ego", "x", 5)]);
        let s = indicators_at_addition(&g, g.node_id("ego").unwrap(), g.node_id("x").unwrap()).unwrap();
        assert_eq!(s, SelectionIndicators::default());
    }

    #[test]
    fn worked_example() {
        // Γ_out(ego) = {a, b}, Γ_in(alter) = {a, c} before t = 10.
        let g = graph(&[
            ("ego", "a", 1),
            ("ego", "b", 2),
            ("a", "alter", 3),
            ("c", "alter", 4),
            ("ego", "alter", 10),
        ]);
        let s = indicators_at_addition(&g, g.node_id("ego").unwrap(), g.node_id("alter").unwrap()).unwrap();
        assert_eq!(s.cn, 1);
        assert!((s.jaccard - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.pa, 4);
        assert_eq!(s.alter_indegree, 2);
    }

    #[test]
    fn missing_edge_errors() {
        let g = graph(&[("a", "b", 1)]);
        let (a, b) = (g.node_id("a").unwrap(), g.node_id("b").unwrap());
        assert_eq!(indicators_at_addition(&g, b, a), Err(SelectionError::MissingEdge(b, a)));
    }

    #[test]
    fn jaccard_one_iff_equal_sets() {
        // Γ_out(i) = {l}, Γ_in(j) = {l}.
        let g = graph(&[("i", "l", 1), ("l", "j", 2), ("i", "j", 3)]);
        let s = indicators_at_addition(&g, g.node_id("i").unwrap(), g.node_id("j").unwrap()).unwrap();
        assert_eq!(s.jaccard, 1.0);
    }

    #[test]
    fn profile_single_ego_is_identity() {
        let g = graph(&[("ego", "a", 1), ("x", "b", 1), ("ego", "b", 2), ("a", "c", 2), ("ego", "c", 3)]);
        let rows = selection_table(&g, &[g.node_id("ego").unwrap()]);
        assert_eq!(rows.len(), 3);
        let prof = indicator_profile(&rows, Indicator::AlterIndegree, 3, Cohort::All, OriginSplit::All).unwrap();
        let got: Vec<f64> = prof.iter().map(|r| r.value.mean).collect();
        assert_eq!(got, vec![0.0, 1.0, 1.0]);
        let cn: Vec<usize> = rows.iter().map(|r| r.indicators.cn).collect();
        assert_eq!(cn, vec![0, 0, 1]);
    }

    #[test]
    fn empty_cohort() {
        let g = graph(&[("ego", "a", 1)]);
        let rows = selection_table(&g, &[g.node_id("ego").unwrap()]);
        assert_eq!(
            indicator_profile(&rows, Indicator::Cn, 5, Cohort::ReachedNMax, OriginSplit::All),
            Err(AggregateError::EmptyCohort)
        );
    }
}
