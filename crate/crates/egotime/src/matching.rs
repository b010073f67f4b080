//! Matched-cohort comparison of next-contact diversity.
//!
//! Egos whose first `k` neighbors are the same, added in the same order, and
//! who registered close together form a matching group. Within a group, egos
//! whose `(k+1)`-st link was recommended are the treatment and the rest the
//! control; the experiment compares the normalized entropy of the contacts
//! each arm adds at the evaluation step.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::Hash;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::rng::{derive_seed_from, rng_for};
use crate::stats::{MeanCi, Moments};
use crate::timegraph::{NodeId, Snapshot, TimeGraph, Timestamp};
use crate::DAY;

pub const DEFAULT_WINDOW_DAYS: i64 = 30;
pub const DEFAULT_MIN_ARM: usize = 5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchingError {
    #[error("undefined normalization: bag has {0} elements, need at least 2")]
    UndefinedNormalization(usize),
}

/// `H(X) / log2 N` with `H(X) = -Σ p(x) log2 p(x)` over a bag of `N >= 2`.
pub fn normalized_entropy<T: Hash + Eq>(bag: &[T]) -> Result<f64, MatchingError> {
    let n = bag.len();
    if n < 2 {
        return Err(MatchingError::UndefinedNormalization(n));
    }
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for x in bag {
        *counts.entry(x).or_default() += 1;
    }
    // H = log2 N - Σ c log2 c / N; exact at both ends of the range.
    let mut cs: Vec<usize> = counts.into_values().collect();
    cs.sort_unstable();
    let s: f64 = cs.iter().map(|&c| c as f64 * (c as f64).log2()).sum();
    let ln = (n as f64).log2();
    Ok(((ln - s / n as f64) / ln).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupMember {
    pub ego: NodeId,
    pub registered_at: Timestamp,
    /// The `(k+1)`-st link was recommended.
    pub treated: bool,
    /// Targets of the `(k+1)`-st and `(k+2)`-nd links.
    pub next: NodeId,
    pub after_next: Option<NodeId>,
    /// The `(k+1)`-st target shared at least one common neighbor with the ego
    /// when the link was created.
    pub next_has_cn: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchingGroup {
    pub k: usize,
    pub prefix: Vec<NodeId>,
    /// Ordinal of the registration bucket within the prefix.
    pub bucket: usize,
    pub members: Vec<GroupMember>,
}

impl MatchingGroup {
    pub fn treatment(&self) -> impl Iterator<Item = &GroupMember> {
        self.members.iter().filter(|m| m.treated)
    }

    pub fn control(&self) -> impl Iterator<Item = &GroupMember> {
        self.members.iter().filter(|m| !m.treated)
    }

    fn seed_words(&self) -> impl Iterator<Item = u64> + '_ {
        [self.k as u64, self.bucket as u64]
            .into_iter()
            .chain(self.prefix.iter().map(|n| n.0 as u64))
    }
}

/// Groups egos by their ordered first-`k` neighbors, then splits each set by
/// registration time: walking in registration order, a new group starts once
/// an ego registered `window_days` or more after the group's first member.
/// Egos with at most `k` neighbors are skipped, as are singleton groups.
pub fn build_groups(g: &TimeGraph, k: usize, window_days: i64) -> Vec<MatchingGroup> {
    assert!(k >= 1, "k must be at least 1");
    let mut by_prefix: BTreeMap<Vec<NodeId>, Vec<GroupMember>> = BTreeMap::new();
    for ego in g.nodes() {
        let out = g.out_edges(ego);
        if out.len() <= k {
            continue;
        }
        let edges: Vec<_> = out.iter().take(k + 2).map(|&e| *g.edge(e)).collect();
        let next = edges[k];
        let member = GroupMember {
            ego,
            registered_at: g.registered_at(ego),
            treated: next.origin.is_recommended(),
            next: next.dst,
            after_next: edges.get(k + 1).map(|e| e.dst),
            next_has_cn: g.common_neighbors(ego, next.dst, Snapshot::Before(next.created_at)) > 0,
        };
        by_prefix
            .entry(edges[..k].iter().map(|e| e.dst).collect())
            .or_default()
            .push(member);
    }
    let window = window_days * DAY;
    let mut groups = Vec::new();
    for (prefix, mut members) in by_prefix {
        if members.len() < 2 {
            continue;
        }
        members.sort_by_key(|m| (m.registered_at, m.ego));
        let mut bucket = 0;
        let mut start = 0;
        for i in 1..=members.len() {
            if i == members.len() || members[i].registered_at - members[start].registered_at >= window {
                if i - start >= 2 {
                    groups.push(MatchingGroup {
                        k,
                        prefix: prefix.clone(),
                        bucket,
                        members: members[start..i].to_vec(),
                    });
                }
                bucket += 1;
                start = i;
            }
        }
    }
    groups
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalStep {
    Next,
    AfterNext,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentFilter {
    Any,
    HasCn,
    NoCn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExperimentOptions {
    pub min_arm: usize,
    pub eval_step: EvalStep,
    pub downsample: bool,
    pub treatment_filter: TreatmentFilter,
    pub seed: u64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            min_arm: DEFAULT_MIN_ARM,
            eval_step: EvalStep::Next,
            downsample: true,
            treatment_filter: TreatmentFilter::Any,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupOutcome {
    pub treatment_size: usize,
    pub control_size: usize,
    pub entropy_treatment: f64,
    pub entropy_control: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyReport {
    pub k: usize,
    pub n_groups: usize,
    /// Groups meeting the arm-size rule whose bags were still too small.
    pub skipped_groups: usize,
    pub mean_entropy_treatment: MeanCi,
    pub mean_entropy_control: MeanCi,
    /// Per-group treatment minus control.
    pub difference: MeanCi,
    pub options: ExperimentOptions,
}

enum Outcome {
    Ineligible,
    Skipped,
    Used(GroupOutcome),
}

fn evaluate(group: &MatchingGroup, opts: &ExperimentOptions) -> Outcome {
    let contact = |m: &GroupMember| match opts.eval_step {
        EvalStep::Next => Some(m.next),
        EvalStep::AfterNext => m.after_next,
    };
    let mut t: Vec<NodeId> = group
        .treatment()
        .filter(|m| match opts.treatment_filter {
            TreatmentFilter::Any => true,
            TreatmentFilter::HasCn => m.next_has_cn,
            TreatmentFilter::NoCn => !m.next_has_cn,
        })
        .filter_map(contact)
        .collect();
    let mut c: Vec<NodeId> = group.control().filter_map(contact).collect();
    if t.len().min(c.len()) < opts.min_arm {
        return Outcome::Ineligible;
    }
    if opts.downsample && t.len() != c.len() {
        let mut rng = rng_for(derive_seed_from(opts.seed, group.seed_words()), 0);
        let keep = t.len().min(c.len());
        let larger = if t.len() > c.len() { &mut t } else { &mut c };
        larger.shuffle(&mut rng);
        larger.truncate(keep);
    }
    match (normalized_entropy(&t), normalized_entropy(&c)) {
        (Ok(et), Ok(ec)) => Outcome::Used(GroupOutcome {
            treatment_size: t.len(),
            control_size: c.len(),
            entropy_treatment: et,
            entropy_control: ec,
        }),
        _ => Outcome::Skipped,
    }
}

/// Per-group outcomes of the groups that qualify, in group order.
pub fn group_outcomes(groups: &[MatchingGroup], opts: &ExperimentOptions) -> (Vec<GroupOutcome>, usize) {
    let res: Vec<Outcome> = groups.par_iter().map(|g| evaluate(g, opts)).collect();
    let skipped = res.iter().filter(|o| matches!(o, Outcome::Skipped)).count();
    let used = res
        .into_iter()
        .filter_map(|o| match o {
            Outcome::Used(x) => Some(x),
            _ => None,
        })
        .collect();
    (used, skipped)
}

/// Averages entropies over qualifying groups (unweighted). `None` when no
/// group qualifies.
pub fn run_experiment(groups: &[MatchingGroup], k: usize, opts: &ExperimentOptions) -> Option<EntropyReport> {
    let (used, skipped) = group_outcomes(groups, opts);
    let t: Moments = used.iter().map(|o| o.entropy_treatment).collect();
    let c: Moments = used.iter().map(|o| o.entropy_control).collect();
    let d: Moments = used.iter().map(|o| o.entropy_treatment - o.entropy_control).collect();
    Some(EntropyReport {
        k,
        n_groups: used.len(),
        skipped_groups: skipped,
        mean_entropy_treatment: t.ci()?,
        mean_entropy_control: c.ci()?,
        difference: d.ci()?,
        options: *opts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchingRun {
    pub reports: Vec<EntropyReport>,
    /// Values of `k` with no qualifying group.
    pub missing_k: Vec<usize>,
}

/// Builds groups and runs the experiment for every `k` in `ks`.
pub fn run_matching(
    g: &TimeGraph,
    ks: std::ops::RangeInclusive<usize>,
    window_days: i64,
    opts: &ExperimentOptions,
) -> MatchingRun {
    let mut reports = Vec::new();
    let mut missing_k = Vec::new();
    for k in ks {
        match run_experiment(&build_groups(g, k, window_days), k, opts) {
            Some(r) => reports.push(r),
            None => missing_k.push(k),
        }
    }
    MatchingRun { reports, missing_k }
}

/// Every ego appears in at most one group.
pub fn groups_disjoint(groups: &[MatchingGroup]) -> bool {
    let mut seen = HashSet::new();
    groups.iter().flat_map(|g| &g.members).all(|m| seen.insert(m.ego))
}
