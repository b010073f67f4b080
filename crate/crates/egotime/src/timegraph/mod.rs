//! Immutable time graph with exact snapshot queries.
//!
//! Edges are kept in one canonical order, `(created_at, src, dst)`, and each
//! node's in/out adjacency is a slice of edge ids in that order. A snapshot
//! query "as of t" is then a binary search for the end of the prefix.
//!
//! Node ids are dense indices assigned by sorting the input labels (numeric
//! labels numerically, others lexicographically), so the same set of records
//! yields the same graph whatever order it arrives in.

mod io;
mod summary;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{
    read_edges, read_impressions, read_nodes, write_edges, write_nodes, Impression,
    ImpressionRead, ParseError,
};
pub use summary::{daily_timeline, degree_stats, DayRow, DegreeStats};

/// Seconds since the UTC epoch.
pub type Timestamp = i64;

/// Index of an edge in the graph's canonical edge order.
pub type EdgeId = u32;

/// Dense node index inside one [`TimeGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// How a link came about.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Spontaneous,
    Recommended,
    /// No recommendation data available. Grouped with spontaneous links in
    /// two-way splits.
    #[default]
    Unknown,
}

impl Origin {
    pub fn is_recommended(self) -> bool {
        self == Origin::Recommended
    }

    /// Single-letter code used in edge files; unknown is the empty string.
    pub fn code(self) -> &'static str {
        match self {
            Origin::Spontaneous => "s",
            Origin::Recommended => "r",
            Origin::Unknown => "",
        }
    }

    pub fn parse(s: &str) -> Option<Origin> {
        match s.trim() {
            "s" | "S" | "spontaneous" => Some(Origin::Spontaneous),
            "r" | "R" | "recommended" => Some(Origin::Recommended),
            "" | "u" | "unknown" => Some(Origin::Unknown),
            _ => None,
        }
    }
}

/// One follow event as read from input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub created_at: Timestamp,
    pub origin: Origin,
    /// Position in the input stream.
    pub seq: u64,
}

impl EdgeRecord {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, created_at: Timestamp) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            created_at,
            origin: Origin::Unknown,
            seq: 0,
        }
    }

    pub fn with_origin(mut self, origin: Origin) -> Self {
        self.origin = origin;
        self
    }
}

/// Registration time of a node, as read from input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMeta {
    pub node: String,
    pub registered_at: Timestamp,
}

/// A stored edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub created_at: Timestamp,
    pub origin: Origin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

/// Which edges a snapshot contains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Snapshot {
    /// Edges with `created_at <= t`: the graph as of `t`.
    AtOrBefore(Timestamp),
    /// Edges with `created_at < t`: the graph a new link created at `t` sees.
    Before(Timestamp),
}

impl Snapshot {
    #[inline]
    pub fn admits(self, created_at: Timestamp) -> bool {
        match self {
            Snapshot::AtOrBefore(t) => created_at <= t,
            Snapshot::Before(t) => created_at < t,
        }
    }

    /// The snapshot containing every edge.
    pub fn all() -> Self {
        Snapshot::AtOrBefore(Timestamp::MAX)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LoadError {
    #[error("record {seq}: negative timestamp {created_at}")]
    NegativeTimestamp { seq: u64, created_at: Timestamp },
    #[error("node {node}: negative registration time {registered_at}")]
    NegativeRegistration { node: String, registered_at: Timestamp },
    #[error("node {node} listed twice in node metadata")]
    DuplicateNode { node: String },
    #[error("record {seq}: edge from {src} at {created_at} precedes its registration at {registered_at}")]
    EdgeBeforeRegistration {
        seq: u64,
        src: String,
        created_at: Timestamp,
        registered_at: Timestamp,
    },
    #[error("more than {} nodes or edges", u32::MAX)]
    TooLarge,
}

/// Counts reported by [`TimeGraph::load`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    /// Edge records read.
    pub records: usize,
    pub self_loops: usize,
    /// Repeat follows collapsed into the earliest occurrence.
    pub duplicates: usize,
    /// Nodes whose registration time was inferred from their first edge.
    pub inferred_registrations: usize,
}

impl LoadReport {
    pub fn dropped(&self) -> usize {
        self.self_loops + self.duplicates
    }
}

#[derive(Clone, Debug, Default)]
struct Csr {
    offsets: Vec<u32>,
    items: Vec<EdgeId>,
}

impl Csr {
    fn build(n: usize, edges: &[Edge], key: impl Fn(&Edge) -> NodeId) -> Self {
        let mut offsets = vec![0u32; n + 1];
        for e in edges {
            offsets[key(e).index() + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut items = vec![0; edges.len()];
        // Edge ids are visited in increasing order, so each slice ends up time-sorted.
        for (id, e) in edges.iter().enumerate() {
            let slot = &mut fill[key(e).index()];
            items[*slot as usize] = id as EdgeId;
            *slot += 1;
        }
        Self { offsets, items }
    }

    #[inline]
    fn get(&self, i: NodeId) -> &[EdgeId] {
        let k = i.index();
        if k + 1 >= self.offsets.len() {
            return &[];
        }
        &self.items[self.offsets[k] as usize..self.offsets[k + 1] as usize]
    }
}

/// Immutable, indexed multigraph of timestamped directed edges.
#[derive(Clone, Debug, Default)]
pub struct TimeGraph {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    registered_at: Vec<Timestamp>,
    registration_inferred: Vec<bool>,
    edges: Vec<Edge>,
    out_adj: Csr,
    in_adj: Csr,
    /// Out-edges of each node sorted by `(dst, edge id)`, aligned with `out_adj` offsets.
    out_by_dst: Vec<(NodeId, EdgeId, Timestamp)>,
    /// Targets and times of `out_adj.items`, position for position.
    out_dst: Vec<NodeId>,
    out_time: Vec<Timestamp>,
    /// Sources and times of `in_adj.items`.
    in_src: Vec<NodeId>,
    in_time: Vec<Timestamp>,
}

fn label_key(label: &str) -> (u8, u64, &str) {
    match label.parse::<u64>() {
        Ok(v) => (0, v, label),
        Err(_) => (1, 0, label),
    }
}

impl TimeGraph {
    /// Builds a graph from edge records and optional node metadata.
    ///
    /// Self-loops are dropped and counted. With `dedup`, repeat `(src, dst)`
    /// pairs collapse into the earliest record.
    pub fn load(
        edges: impl IntoIterator<Item = EdgeRecord>,
        nodes: impl IntoIterator<Item = NodeMeta>,
        dedup: bool,
    ) -> Result<(TimeGraph, LoadReport), LoadError> {
        let mut report = LoadReport::default();
        let mut raw: Vec<EdgeRecord> = Vec::new();
        for mut rec in edges {
            rec.seq = report.records as u64;
            report.records += 1;
            if rec.created_at < 0 {
                return Err(LoadError::NegativeTimestamp {
                    seq: rec.seq,
                    created_at: rec.created_at,
                });
            }
            if rec.src == rec.dst {
                report.self_loops += 1;
                continue;
            }
            raw.push(rec);
        }

        let mut meta: HashMap<String, Timestamp> = HashMap::new();
        for m in nodes {
            if m.registered_at < 0 {
                return Err(LoadError::NegativeRegistration {
                    node: m.node,
                    registered_at: m.registered_at,
                });
            }
            if meta.insert(m.node.clone(), m.registered_at).is_some() {
                return Err(LoadError::DuplicateNode { node: m.node });
            }
        }

        // Intern labels in sorted order.
        let mut labels: Vec<String> = {
            let mut seen: HashMap<&str, ()> = HashMap::new();
            for r in &raw {
                seen.insert(&r.src, ());
                seen.insert(&r.dst, ());
            }
            for k in meta.keys() {
                seen.insert(k, ());
            }
            seen.into_keys().map(str::to_owned).collect()
        };
        labels.sort_by(|a, b| label_key(a).cmp(&label_key(b)));
        if labels.len() > u32::MAX as usize || raw.len() > u32::MAX as usize {
            return Err(LoadError::TooLarge);
        }
        let index: HashMap<String, NodeId> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), NodeId(i as u32)))
            .collect();

        let mut stored: Vec<(Edge, u64)> = raw
            .iter()
            .map(|r| {
                (
                    Edge {
                        src: index[&r.src],
                        dst: index[&r.dst],
                        created_at: r.created_at,
                        origin: r.origin,
                    },
                    r.seq,
                )
            })
            .collect();

        if dedup {
            // Earliest occurrence wins; among equal timestamps the origin codes
            // are ordered so the result does not depend on input order.
            stored.sort_by_key(|(e, _)| (e.src, e.dst, e.created_at, e.origin));
            let before = stored.len();
            stored.dedup_by(|b, a| a.0.src == b.0.src && a.0.dst == b.0.dst);
            report.duplicates = before - stored.len();
        }
        stored.sort_by_key(|(e, _)| (e.created_at, e.src, e.dst, e.origin));
        let edges: Vec<Edge> = stored.into_iter().map(|(e, _)| e).collect();

        let n = labels.len();
        let out_adj = Csr::build(n, &edges, |e| e.src);
        let in_adj = Csr::build(n, &edges, |e| e.dst);
        let mut out_by_dst: Vec<(NodeId, EdgeId, Timestamp)> = out_adj
            .items
            .iter()
            .map(|&id| (edges[id as usize].dst, id, edges[id as usize].created_at))
            .collect();
        for i in 0..n {
            let (a, b) = (out_adj.offsets[i] as usize, out_adj.offsets[i + 1] as usize);
            out_by_dst[a..b].sort_unstable();
        }
        let out_dst = out_adj.items.iter().map(|&id| edges[id as usize].dst).collect();
        let out_time = out_adj.items.iter().map(|&id| edges[id as usize].created_at).collect();
        let in_src = in_adj.items.iter().map(|&id| edges[id as usize].src).collect();
        let in_time = in_adj.items.iter().map(|&id| edges[id as usize].created_at).collect();

        let mut registered_at = vec![0; n];
        let mut registration_inferred = vec![false; n];
        for (i, label) in labels.iter().enumerate() {
            let id = NodeId(i as u32);
            let first_out = out_adj.get(id).first().map(|&e| edges[e as usize].created_at);
            match meta.get(label) {
                Some(&reg) => {
                    registered_at[i] = reg;
                    if let Some(t) = first_out {
                        if t < reg {
                            let e = &raw
                                .iter()
                                .filter(|r| r.src == *label)
                                .min_by_key(|r| (r.created_at, r.seq))
                                .expect("out edge exists");
                            return Err(LoadError::EdgeBeforeRegistration {
                                seq: e.seq,
                                src: label.clone(),
                                created_at: t,
                                registered_at: reg,
                            });
                        }
                    }
                }
                None => {
                    let first_in = in_adj.get(id).first().map(|&e| edges[e as usize].created_at);
                    registered_at[i] = first_out.or(first_in).unwrap_or(0);
                    registration_inferred[i] = true;
                    report.inferred_registrations += 1;
                }
            }
        }

        Ok((
            TimeGraph {
                labels,
                index,
                registered_at,
                registration_inferred,
                edges,
                out_adj,
                in_adj,
                out_by_dst,
                out_dst,
                out_time,
                in_src,
                in_time,
            },
            report,
        ))
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = NodeId> {
        (0..self.labels.len() as u32).map(NodeId)
    }

    pub fn node_id(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id.index()]
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.labels.len()
    }

    /// All edges in canonical `(created_at, src, dst)` order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id as usize]
    }

    pub fn registered_at(&self, id: NodeId) -> Timestamp {
        self.registered_at[id.index()]
    }

    /// True when the registration time was not supplied and was taken from
    /// the node's first edge.
    pub fn registration_inferred(&self, id: NodeId) -> bool {
        self.registration_inferred[id.index()]
    }

    /// Earliest and latest edge timestamps.
    pub fn time_span(&self) -> Option<(Timestamp, Timestamp)> {
        Some((self.edges.first()?.created_at, self.edges.last()?.created_at))
    }

    /// Out-edges of `i` in creation order. Empty for unknown nodes.
    #[inline]
    pub fn out_edges(&self, i: NodeId) -> &[EdgeId] {
        self.out_adj.get(i)
    }

    /// In-edges of `i` in creation order. Empty for unknown nodes.
    #[inline]
    pub fn in_edges(&self, i: NodeId) -> &[EdgeId] {
        self.in_adj.get(i)
    }

    #[inline]
    fn prefix<'a>(&self, ids: &'a [EdgeId], snap: Snapshot) -> &'a [EdgeId] {
        let k = ids.partition_point(|&e| snap.admits(self.edges[e as usize].created_at));
        &ids[..k]
    }

    /// Out-edges of `i` present in `snap`.
    #[inline]
    pub fn out_edges_in(&self, i: NodeId, snap: Snapshot) -> &[EdgeId] {
        self.prefix(self.out_edges(i), snap)
    }

    #[inline]
    pub fn in_edges_in(&self, i: NodeId, snap: Snapshot) -> &[EdgeId] {
        self.prefix(self.in_edges(i), snap)
    }

    /// Targets and creation times of `i`'s out-edges in `snap`, in creation
    /// order.
    pub fn out_targets_in(&self, i: NodeId, snap: Snapshot) -> (&[NodeId], &[Timestamp]) {
        let k = i.index();
        if k + 1 >= self.out_adj.offsets.len() {
            return (&[], &[]);
        }
        let (a, b) = (self.out_adj.offsets[k] as usize, self.out_adj.offsets[k + 1] as usize);
        let times = &self.out_time[a..b];
        let m = times.partition_point(|&t| snap.admits(t));
        (&self.out_dst[a..a + m], &times[..m])
    }

    /// Sources and creation times of `j`'s in-edges in `snap`, in creation
    /// order.
    pub fn in_sources_in(&self, j: NodeId, snap: Snapshot) -> (&[NodeId], &[Timestamp]) {
        let k = j.index();
        if k + 1 >= self.in_adj.offsets.len() {
            return (&[], &[]);
        }
        let (a, b) = (self.in_adj.offsets[k] as usize, self.in_adj.offsets[k + 1] as usize);
        let times = &self.in_time[a..b];
        let m = times.partition_point(|&t| snap.admits(t));
        (&self.in_src[a..a + m], &times[..m])
    }

    /// Nodes `i` follows as of `t` (edges with `created_at <= t`), in creation order.
    pub fn out_neighbors_at(&self, i: NodeId, t: Timestamp) -> impl Iterator<Item = NodeId> + '_ {
        self.out_edges_in(i, Snapshot::AtOrBefore(t))
            .iter()
            .map(|&e| self.edges[e as usize].dst)
    }

    /// Followers of `i` as of `t`, in creation order.
    pub fn in_neighbors_at(&self, i: NodeId, t: Timestamp) -> impl Iterator<Item = NodeId> + '_ {
        self.in_edges_in(i, Snapshot::AtOrBefore(t))
            .iter()
            .map(|&e| self.edges[e as usize].src)
    }

    pub fn neighbors_in(
        &self,
        i: NodeId,
        snap: Snapshot,
        dir: Direction,
    ) -> impl Iterator<Item = NodeId> + '_ {
        let ids = match dir {
            Direction::Out => self.out_edges_in(i, snap),
            Direction::In => self.in_edges_in(i, snap),
        };
        ids.iter().map(move |&e| {
            let edge = &self.edges[e as usize];
            match dir {
                Direction::Out => edge.dst,
                Direction::In => edge.src,
            }
        })
    }

    pub fn degree_at(&self, i: NodeId, t: Timestamp, dir: Direction) -> usize {
        self.degree_in(i, Snapshot::AtOrBefore(t), dir)
    }

    pub fn degree_in(&self, i: NodeId, snap: Snapshot, dir: Direction) -> usize {
        match dir {
            Direction::Out => self.out_edges_in(i, snap).len(),
            Direction::In => self.in_edges_in(i, snap).len(),
        }
    }

    fn first_between(&self, i: NodeId, j: NodeId) -> Option<(EdgeId, Timestamp)> {
        let k = i.index();
        if k + 1 >= self.out_adj.offsets.len() {
            return None;
        }
        let slice = &self.out_by_dst
            [self.out_adj.offsets[k] as usize..self.out_adj.offsets[k + 1] as usize];
        let pos = slice.partition_point(|&(d, _, _)| d < j);
        match slice.get(pos) {
            Some(&(d, id, t)) if d == j => Some((id, t)),
            _ => None,
        }
    }

    /// The earliest edge `i -> j`, if any.
    pub fn edge_between(&self, i: NodeId, j: NodeId) -> Option<EdgeId> {
        self.first_between(i, j).map(|(id, _)| id)
    }

    pub fn has_edge_in(&self, i: NodeId, j: NodeId, snap: Snapshot) -> bool {
        self.first_between(i, j).is_some_and(|(_, t)| snap.admits(t))
    }

    /// `|Γ_out(i) ∩ Γ_in(j)|` in `snap`: the number of directed two-step paths `i -> l -> j`.
    pub fn common_neighbors(&self, i: NodeId, j: NodeId, snap: Snapshot) -> usize {
        self.count_paths(i, j, snap, false)
    }

    /// True when a link `i -> j` created at `t` closes a directed triangle:
    /// some `l` with `i -> l` and `l -> j` both created strictly before `t`.
    pub fn closes_directed_triangle(&self, i: NodeId, j: NodeId, t: Timestamp) -> bool {
        self.count_paths(i, j, Snapshot::Before(t), true) > 0
    }

    fn count_paths(&self, i: NodeId, j: NodeId, snap: Snapshot, stop_at_first: bool) -> usize {
        let (outs, _) = self.out_targets_in(i, snap);
        let (ins, _) = self.in_sources_in(j, snap);
        let mut count = 0;
        if outs.len() <= ins.len() {
            for &l in outs {
                if l != j && self.has_edge_in(l, j, snap) {
                    count += 1;
                    if stop_at_first {
                        break;
                    }
                }
            }
        } else {
            for &l in ins {
                if l != i && self.has_edge_in(i, l, snap) {
                    count += 1;
                    if stop_at_first {
                        break;
                    }
                }
            }
        }
        count
    }
}
