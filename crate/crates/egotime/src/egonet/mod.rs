//! Ego-network snapshots and growth trajectories.
//!
//! The ego-network of `i` at time `t` is the subgraph induced by `i`'s
//! out-neighbors as of `t`; links between the ego and its alters are not part
//! of it. A trajectory samples that subgraph at every neighbor addition: step
//! `n` holds the first `n` alters (in creation order) and every edge among
//! them created no later than the `n`-th addition.

mod aggregate;
mod distance;

use std::cell::RefCell;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::timegraph::{NodeId, Origin, Snapshot, TimeGraph, Timestamp};
use crate::unionfind::UnionFind;

pub use aggregate::{
    aggregate_trajectories, aggregate_trajectories_split, densification_fit,
    densification_fit_points, spawn_probability_by_origin, AggregateError, AggregateRow, Cohort,
    DensificationFit, Metric, OriginSplit, SpawnRow,
};
pub use distance::{mean_distance, DistanceStats};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EgoError {
    #[error("ego {0} has no out-neighbors")]
    EmptyEgo(NodeId),
}

/// Induced subgraph on an ego's out-neighbors at one instant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EgoNetwork {
    pub ego: NodeId,
    pub t: Timestamp,
    /// Alters in the order they were added.
    pub members: Vec<NodeId>,
    /// Directed edges among members, sorted.
    pub edges: Vec<(NodeId, NodeId)>,
}

impl EgoNetwork {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Undirected projection as member-index pairs `(a, b)` with `a < b`.
    pub fn undirected_pairs(&self) -> Vec<(usize, usize)> {
        let pos: HashMap<NodeId, usize> =
            self.members.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        let mut pairs: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|(a, b)| {
                let (x, y) = (pos[a], pos[b]);
                (x.min(y), x.max(y))
            })
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

/// Alters of `ego` in creation order with the creating edge's time and
/// origin. Repeat follows (only possible without dedup) keep the first.
fn alters(g: &TimeGraph, ego: NodeId, snap: Snapshot) -> Vec<(NodeId, Timestamp, Origin)> {
    let mut seen = std::collections::HashSet::new();
    g.out_edges_in(ego, snap)
        .iter()
        .map(|&e| g.edge(e))
        .filter(|e| seen.insert(e.dst))
        .map(|e| (e.dst, e.created_at, e.origin))
        .collect()
}

/// Directed edges among `members` admitted by `snap`, as
/// `(member index, member index, created_at)`.
fn intra_edges(
    g: &TimeGraph,
    members: &[NodeId],
    snap: Snapshot,
) -> Vec<(usize, usize, Timestamp)> {
    thread_local! {
        // Member position + 1 per node; zero outside the current call.
        static POS: RefCell<Vec<u32>> = const { RefCell::new(Vec::new()) };
    }
    POS.with_borrow_mut(|pos| {
        if pos.len() < g.node_count() {
            pos.resize(g.node_count(), 0);
        }
        for (i, m) in members.iter().enumerate() {
            pos[m.index()] = i as u32 + 1;
        }
        let mut out = Vec::new();
        for (ia, &a) in members.iter().enumerate() {
            let (dsts, times) = g.out_targets_in(a, snap);
            // Scan whichever side is smaller: a's out-list or the member list.
            if dsts.len() <= members.len() * 4 {
                for (d, &t) in dsts.iter().zip(times) {
                    let ib = pos[d.index()];
                    if ib > 0 {
                        out.push((ia, ib as usize - 1, t));
                    }
                }
            } else {
                for (ib, &b) in members.iter().enumerate() {
                    if let Some(e) = g.edge_between(a, b) {
                        let created = g.edge(e).created_at;
                        if snap.admits(created) {
                            out.push((ia, ib, created));
                        }
                    }
                }
            }
        }
        for m in members {
            pos[m.index()] = 0;
        }
        out
    })
}

/// The ego-network of `ego` as of `t` (edges with `created_at <= t`).
pub fn ego_network_at(g: &TimeGraph, ego: NodeId, t: Timestamp) -> EgoNetwork {
    let snap = Snapshot::AtOrBefore(t);
    let members: Vec<NodeId> = alters(g, ego, snap).into_iter().map(|a| a.0).collect();
    let mut edges: Vec<(NodeId, NodeId)> = intra_edges(g, &members, snap)
        .into_iter()
        .map(|(a, b, _)| (members[a], members[b]))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    EgoNetwork {
        ego,
        t,
        members,
        edges,
    }
}

/// The ego-network including every edge in the data.
pub fn final_ego_network(g: &TimeGraph, ego: NodeId) -> EgoNetwork {
    ego_network_at(g, ego, Timestamp::MAX)
}

/// Structural state of an ego-network right after its `n`-th addition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryStep {
    pub n: usize,
    pub added_node: NodeId,
    pub added_at: Timestamp,
    pub origin: Origin,
    /// Directed edges among the `n` members.
    pub edges: usize,
    /// Largest weakly connected component size over `n`.
    pub gcc_ratio: f64,
    pub n_components: usize,
    /// Mean hop distance on the undirected projection; absent when no pair is
    /// connected or when this step was not sampled.
    pub net_distance: Option<f64>,
    /// The added node had no link to any earlier member at this step. Always
    /// false for the first member.
    pub spawned_new_component: bool,
    /// Change in `net_distance` since the previous step where it was defined.
    pub distance_delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EgoTrajectory {
    pub ego: NodeId,
    pub steps: Vec<TrajectoryStep>,
}

impl EgoTrajectory {
    pub fn final_size(&self) -> usize {
        self.steps.len()
    }
}

/// Which pairs the network distance averages over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum DistanceScope {
    /// All connected unordered pairs.
    #[default]
    ConnectedPairs,
    /// Pairs inside the largest component only.
    GiantComponent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryOptions {
    /// Egos with at most this many members get the distance at every step.
    pub full_distance_limit: usize,
    /// Larger egos get it at geometrically spaced steps with this ratio (and
    /// at the final step).
    pub distance_ratio: f64,
    pub scope: DistanceScope,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            full_distance_limit: 500,
            distance_ratio: 1.1,
            scope: DistanceScope::ConnectedPairs,
        }
    }
}

pub fn trajectory(g: &TimeGraph, ego: NodeId) -> Result<EgoTrajectory, EgoError> {
    trajectory_with(g, ego, &TrajectoryOptions::default())
}

pub fn trajectory_with(
    g: &TimeGraph,
    ego: NodeId,
    opts: &TrajectoryOptions,
) -> Result<EgoTrajectory, EgoError> {
    let alters = alters(g, ego, Snapshot::all());
    let k = alters.len();
    if k == 0 {
        return Err(EgoError::EmptyEgo(ego));
    }
    let members: Vec<NodeId> = alters.iter().map(|a| a.0).collect();
    let times: Vec<Timestamp> = alters.iter().map(|a| a.1).collect();

    // Step (1-based) at which each edge enters the trajectory.
    let activation = |a: usize, b: usize, created: Timestamp| -> Option<usize> {
        let by_time = times.partition_point(|&t| t < created) + 1;
        let step = (a + 1).max(b + 1).max(by_time);
        (step <= k).then_some(step)
    };
    let mut directed_at = vec![0usize; k + 1];
    let mut undirected: Vec<((usize, usize), usize)> = Vec::new();
    for (a, b, created) in intra_edges(g, &members, Snapshot::all()) {
        let Some(step) = activation(a, b, created) else {
            continue;
        };
        directed_at[step] += 1;
        undirected.push(((a.min(b), a.max(b)), step));
    }
    // Each pair enters at the earlier of its two directions.
    undirected.sort_unstable();
    undirected.dedup_by_key(|p| p.0);
    let mut pairs_at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); k + 1];
    for ((a, b), step) in undirected {
        pairs_at[step].push((a, b));
    }

    let full = k <= opts.full_distance_limit;
    let mut next_sample = 1usize;
    let mut uf = UnionFind::with_capacity(k);
    let incremental = full && opts.scope == DistanceScope::ConnectedPairs;
    let mut inc = distance::IncrementalDistances::new(if incremental { k } else { 0 });
    let mut adj = distance::BitAdjacency::new(if incremental { 0 } else { k });
    let mut edges = 0usize;
    let mut steps = Vec::with_capacity(k);
    let mut last_distance: Option<f64> = None;
    let mut prev_defined: Option<f64> = None;
    let mut dirty = false;

    for n in 1..=k {
        let new = n - 1;
        uf.push();
        if incremental {
            inc.push();
        }
        let mut linked = false;
        for &(a, b) in &pairs_at[n] {
            uf.union(a, b);
            if incremental {
                inc.link(a, b);
            } else {
                adj.link(a, b);
            }
            linked |= a == new || b == new;
            dirty = true;
        }
        edges += directed_at[n];

        let sampled = full || n >= next_sample || n == k;
        let net_distance = if sampled {
            if !full {
                next_sample = (n + 1).max((n as f64 * opts.distance_ratio).ceil() as usize);
            }
            if incremental {
                last_distance = inc.stats().mean();
            } else if dirty {
                dirty = false;
                let giant = match opts.scope {
                    DistanceScope::ConnectedPairs => None,
                    DistanceScope::GiantComponent => Some(giant_members(&mut uf, n)),
                };
                last_distance = adj.mean_distance(n, giant.as_deref()).mean();
            }
            last_distance
        } else {
            None
        };
        let distance_delta = match (net_distance, prev_defined) {
            (Some(d), Some(p)) => Some(d - p),
            _ => None,
        };
        if net_distance.is_some() {
            prev_defined = net_distance;
        }
        steps.push(TrajectoryStep {
            n,
            added_node: members[new],
            added_at: times[new],
            origin: alters[new].2,
            edges,
            gcc_ratio: uf.largest() as f64 / n as f64,
            n_components: uf.components(),
            net_distance,
            spawned_new_component: n >= 2 && !linked,
            distance_delta,
        });
    }
    Ok(EgoTrajectory { ego, steps })
}

/// Membership mask of the largest component among the first `n` nodes; ties
/// go to the component containing the lowest index.
fn giant_members(uf: &mut UnionFind, n: usize) -> Vec<bool> {
    let largest = uf.largest();
    let root = (0..n)
        .find(|&i| uf.set_size(i) == largest)
        .map(|i| uf.find(i))
        .unwrap_or(0);
    (0..n).map(|i| uf.find(i) == root).collect()
}

/// Trajectories for every ego with at least one out-neighbor, computed in
/// parallel and returned in node order.
pub fn trajectories(g: &TimeGraph, opts: &TrajectoryOptions) -> Vec<EgoTrajectory> {
    let egos: Vec<NodeId> = g.nodes().filter(|&n| !g.out_edges(n).is_empty()).collect();
    trajectories_for(g, &egos, opts)
}

pub fn trajectories_for(
    g: &TimeGraph,
    egos: &[NodeId],
    opts: &TrajectoryOptions,
) -> Vec<EgoTrajectory> {
    egos.par_iter()
        .filter_map(|&ego| trajectory_with(g, ego, opts).ok())
        .collect()
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
    fn ego_links_are_excluded() {
        let g = graph(&[("ego", "a", 1), ("ego", "b", 2)]);
        let ego = g.node_id("ego").unwrap();
        let en = ego_network_at(&g, ego, 10);
        assert_eq!(en.len(), 2);
        assert!(en.edges.is_empty());

        let g = graph(&[("ego", "a", 1), ("ego", "b", 2), ("a", "b", 3), ("b", "ego", 4)]);
        let en = ego_network_at(&g, g.node_id("ego").unwrap(), 10);
        assert_eq!(en.len(), 2);
        assert_eq!(en.edges, vec![(g.node_id("a").unwrap(), g.node_id("b").unwrap())]);
    }

    #[test]
    fn star_spawns_every_step() {
        let g = graph(&[("ego", "a", 1), ("ego", "b", 2), ("ego", "c", 3), ("ego", "d", 4)]);
        let tr = trajectory(&g, g.node_id("ego").unwrap()).unwrap();
        for s in &tr.steps {
            assert_eq!(s.n_components, s.n);
            assert!((s.gcc_ratio - 1.0 / s.n as f64).abs() < 1e-12);
            assert_eq!(s.spawned_new_component, s.n >= 2);
            assert_eq!(s.net_distance, None);
        }
    }

    #[test]
    fn clique_stays_at_distance_one() {
        // Each alter already follows every earlier one when added.
        let mut e = vec![("a", "b", 0), ("a", "c", 0), ("b", "c", 0), ("a", "d", 0), ("b", "d", 0), ("c", "d", 0)];
        e.extend([("ego", "a", 10), ("ego", "b", 11), ("ego", "c", 12), ("ego", "d", 13)]);
        let g = graph(&e);
        let tr = trajectory(&g, g.node_id("ego").unwrap()).unwrap();
        for s in tr.steps.iter().skip(1) {
            assert_eq!(s.net_distance, Some(1.0));
            assert_eq!(s.gcc_ratio, 1.0);
            assert!(!s.spawned_new_component);
        }
        assert_eq!(tr.steps[3].edges, 6);
    }

    #[test]
    fn path_distance_four_thirds() {
        let g = graph(&[
            ("a", "b", 0),
            ("c", "b", 0),
            ("ego", "a", 10),
            ("ego", "b", 11),
            ("ego", "c", 12),
        ]);
        let tr = trajectory(&g, g.node_id("ego").unwrap()).unwrap();
        let s3 = &tr.steps[2];
        assert_eq!(s3.n_components, 1);
        assert_eq!(s3.net_distance, Some(4.0 / 3.0));
        assert_eq!(tr.steps[1].net_distance, Some(1.0));
        assert_eq!(s3.distance_delta, Some(4.0 / 3.0 - 1.0));
    }

    #[test]
    fn late_edges_attach_to_the_step_where_they_appear() {
        // a->b is created after b joins, before c joins.
        let g = graph(&[("ego", "a", 10), ("ego", "b", 11), ("a", "b", 12), ("ego", "c", 13)]);
        let tr = trajectory(&g, g.node_id("ego").unwrap()).unwrap();
        assert_eq!(tr.steps[1].edges, 0);
        assert!(tr.steps[1].spawned_new_component);
        assert_eq!(tr.steps[2].edges, 1);
        assert_eq!(tr.steps[2].n_components, 2);
        assert!(tr.steps[2].spawned_new_component);
    }

    #[test]
    fn empty_ego_is_an_error() {
        let g = graph(&[("a", "b", 1)]);
        let b = g.node_id("b").unwrap();
        assert_eq!(trajectory(&g, b), Err(EgoError::EmptyEgo(b)));
    }

    #[test]
    fn giant_scope_ignores_small_components() {
        // Components {a,b,c} as a path and {d,e}.
        let g = graph(&[
            ("a", "b", 0),
            ("b", "c", 0),
            ("d", "e", 0),
            ("ego", "a", 10),
            ("ego", "b", 11),
            ("ego", "c", 12),
            ("ego", "d", 13),
            ("ego", "e", 14),
        ]);
        let ego = g.node_id("ego").unwrap();
        let opts = TrajectoryOptions {
            scope: DistanceScope::GiantComponent,
            ..Default::default()
        };
        let tr = trajectory_with(&g, ego, &opts).unwrap();
        assert_eq!(tr.steps[4].net_distance, Some(4.0 / 3.0));
        let all = trajectory(&g, ego).unwrap();
        assert_eq!(all.steps[4].net_distance, Some(5.0 / 4.0));
    }

    #[test]
    fn large_egos_sample_distance_geometrically() {
        let mut e: Vec<(String, String, Timestamp)> = Vec::new();
        for i in 0..40 {
            e.push(("ego".into(), format!("m{i}"), 100 + i));
            if i > 0 {
                e.push((format!("m{i}"), format!("m{}", i - 1), 0));
            }
        }
        let g = TimeGraph::load(
            e.iter().map(|(s, d, t)| EdgeRecord::new(s.as_str(), d.as_str(), *t)),
            vec![],
            true,
        )
        .unwrap()
        .0;
        let opts = TrajectoryOptions {
            full_distance_limit: 10,
            distance_ratio: 1.5,
            ..Default::default()
        };
        let tr = trajectory_with(&g, g.node_id("ego").unwrap(), &opts).unwrap();
        let sampled: Vec<usize> = tr.steps.iter().filter(|s| s.net_distance.is_some()).map(|s| s.n).collect();
        assert!(sampled.len() < 40);
        assert_eq!(*sampled.last().unwrap(), 40);
        // Path graph of n nodes has mean distance (n + 1) / 3.
        for s in tr.steps.iter().filter(|s| s.net_distance.is_some()) {
            assert!((s.net_distance.unwrap() - (s.n as f64 + 1.0) / 3.0).abs() < 1e-12);
        }
    }
}
