//! Temporal ego-network analytics.
//!
//! `egotime` loads timestamped, directed follow events into an immutable
//! [`TimeGraph`](timegraph::TimeGraph) that answers "the graph as of time t"
//! exactly, and builds the longitudinal analyses of ego-network growth on top
//! of it:
//!
//! - [`egonet`]: ego-network snapshots and per-addition structural
//!   trajectories (components, giant-component ratio, network distance,
//!   densification).
//! - [`selection`]: popularity/similarity of each new neighbor at the instant
//!   it was added.
//! - [`sessions`]: inactivity-timeout sessionization and discrete power-law
//!   fitting.
//! - [`communities`]: modularity partitions of final ego-networks, temporal
//!   community ranks and inversion scores against a reshuffling null model.
//! - [`matching`]: matched-cohort comparison of next-contact diversity between
//!   egos that did and did not follow a recommendation.
//! - [`linkpred`]: pair sampling at directed distance two, six structural and
//!   temporal features, and a seeded random forest with cross-validation.
//! - [`synth`]: a growth generator with planted ground truth.
//!
//! Every link carries an [`Origin`](timegraph::Origin) so that each analysis
//! can be split between spontaneously created links and links created after a
//! recommender impression.

pub mod attribution;
pub mod communities;
pub mod egonet;
pub mod linkpred;
pub mod matching;
pub mod rng;
pub mod selection;
pub mod sessions;
pub mod stats;
pub mod synth;
pub mod timegraph;
pub mod unionfind;

pub use timegraph::{Edge, EdgeRecord, NodeId, NodeMeta, Origin, TimeGraph, Timestamp};

/// Seconds in one day.
pub const DAY: Timestamp = 86_400;
