//! Synthetic follow-graph growth with planted ground truth.
//!
//! Every node is an ego that registers at a random time and then creates
//! links in bursty sessions: batch sizes follow a discrete power law and the
//! gaps between sessions a power law with an exponential cutoff, stretched as
//! the ego ages. Session schedules are drawn per ego from derived seeds; the
//! additions are then replayed in `(time, ego, ordinal)` order and each picks
//! a target by preferential attachment, triadic closure, planted community
//! or uniformly at random, unless the recommender takes over.

mod oracle;
mod sample;

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use oracle::{oracle_report, OracleReport};

use crate::rng::{derive_seed, derive_seed_from, rng_for};
use crate::timegraph::{EdgeRecord, NodeMeta, Origin, Timestamp};
use crate::DAY;
use sample::{BatchSizes, CutoffPowerLaw};

/// 2012-01-01T00:00:00Z.
pub const DEFAULT_START: Timestamp = 1_325_376_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionProcess {
    pub batch_size_gamma: f64,
    pub batch_size_max: usize,
    pub gap_gamma: f64,
    pub gap_min_hours: f64,
    pub gap_cutoff_hours: f64,
    /// Seconds between additions inside a batch, drawn uniformly.
    pub intra_gap_min: Timestamp,
    pub intra_gap_max: Timestamp,
}

impl Default for SessionProcess {
    fn default() -> Self {
        Self {
            batch_size_gamma: 2.2,
            batch_size_max: 200,
            gap_gamma: 1.2,
            gap_min_hours: 0.5,
            gap_cutoff_hours: 24.0 * 30.0,
            intra_gap_min: 5,
            intra_gap_max: 300,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttachmentMix {
    pub preferential: f64,
    pub triadic: f64,
    pub community: f64,
    pub uniform: f64,
}

impl Default for AttachmentMix {
    fn default() -> Self {
        Self {
            preferential: 0.35,
            triadic: 0.3,
            community: 0.25,
            uniform: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityPlan {
    pub community_size: usize,
    /// Links an ego makes into its `c`-th community, by order of opening.
    /// Further communities reuse the last quota.
    pub quotas: Vec<usize>,
    /// Community `c + 1` opens once this fraction of `c`'s quota is linked;
    /// 1.0 means strictly one community after another.
    pub open_fraction: f64,
}

impl Default for CommunityPlan {
    fn default() -> Self {
        Self {
            community_size: 60,
            quotas: vec![3, 4, 5, 6, 8, 6, 5, 4],
            open_fraction: 0.8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommenderPolicy {
    /// The friend-of-friend with the most common neighbors; ties go to the
    /// higher in-degree, then the lower id. Without friends-of-friends the
    /// addition stays spontaneous.
    MaxCnFof,
    /// A uniformly random registered node.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommender {
    pub enabled: bool,
    pub probability: f64,
    pub policy: RecommenderPolicy,
}

impl Default for Recommender {
    fn default() -> Self {
        Self {
            enabled: true,
            probability: 0.2,
            policy: RecommenderPolicy::MaxCnFof,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_egos: usize,
    pub start: Timestamp,
    pub horizon_days: i64,
    /// Registrations are uniform over the first this many days.
    pub registration_span_days: i64,
    pub sessions: SessionProcess,
    pub mix: AttachmentMix,
    pub communities: CommunityPlan,
    pub recommender: Recommender,
    /// Most additions per ego per UTC day; 0 disables the cap.
    pub daily_cap: usize,
    pub max_out_degree: usize,
    /// Inter-session gaps are multiplied by `1 + age / age_scale_days`.
    pub age_scale_days: Option<f64>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_egos: 1000,
            start: DEFAULT_START,
            horizon_days: 365,
            registration_span_days: 180,
            sessions: SessionProcess::default(),
            mix: AttachmentMix::default(),
            communities: CommunityPlan::default(),
            recommender: Recommender::default(),
            daily_cap: 200,
            max_out_degree: 300,
            age_scale_days: Some(30.0),
            seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("infeasible config: {0}")]
    Infeasible(String),
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        let w = [self.mix.preferential, self.mix.triadic, self.mix.community, self.mix.uniform];
        if w.iter().any(|x| !(*x >= 0.0)) {
            return bad("mix weights must be non-negative");
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("mix weights must sum to 1");
        }
        if !(0.0..=1.0).contains(&self.recommender.probability) {
            return bad("recommender probability must lie in [0, 1]");
        }
        let s = &self.sessions;
        if !(s.batch_size_gamma > 0.0) || s.batch_size_max == 0 {
            return bad("batch size law needs gamma > 0 and max >= 1");
        }
        if !(s.gap_gamma >= 0.0) || !(s.gap_min_hours > 0.0) || !(s.gap_cutoff_hours > 0.0) {
            return bad("gap law needs gamma >= 0 and positive x_min and cutoff");
        }
        if s.intra_gap_min < 0 || s.intra_gap_max < s.intra_gap_min {
            return bad("intra-batch gap range is empty");
        }
        if self.horizon_days <= 0 || self.registration_span_days < 0 {
            return bad("horizon must be positive");
        }
        if self.start < 0 {
            return bad("start must be non-negative");
        }
        if self.age_scale_days.is_some_and(|a| !(a > 0.0)) {
            return bad("age scale must be positive");
        }
        let c = &self.communities;
        if !(0.0..=1.0).contains(&c.open_fraction) {
            return bad("open fraction must lie in [0, 1]");
        }
        if self.mix.community > 0.0 && self.n_egos > 0 {
            if c.quotas.is_empty() || c.quotas.contains(&0) {
                return bad("community quotas must be positive");
            }
            let max_q = *c.quotas.iter().max().unwrap();
            if c.community_size < 2 || max_q >= c.community_size {
                return Err(SynthError::Infeasible(format!(
                    "quota {max_q} does not fit communities of size {}",
                    c.community_size
                )));
            }
            if self.n_egos / c.community_size < c.quotas.len() + 1 {
                return Err(SynthError::Infeasible(format!(
                    "{} egos cannot hold {} communities of size {}",
                    self.n_egos,
                    c.quotas.len() + 1,
                    c.community_size
                )));
            }
        }
        Ok(())
    }

    pub fn end(&self) -> Timestamp {
        self.start + self.horizon_days * DAY
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Preferential,
    Triadic,
    Community,
    Uniform,
    Recommender,
}

impl Mechanism {
    pub fn code(self) -> char {
        match self {
            Mechanism::Preferential => 'p',
            Mechanism::Triadic => 't',
            Mechanism::Community => 'c',
            Mechanism::Uniform => 'u',
            Mechanism::Recommender => 'r',
        }
    }

    pub fn from_code(c: char) -> Option<Mechanism> {
        Some(match c {
            'p' => Mechanism::Preferential,
            't' => Mechanism::Triadic,
            'c' => Mechanism::Community,
            'u' => Mechanism::Uniform,
            'r' => Mechanism::Recommender,
            _ => return None,
        })
    }
}

/// What the generator planted, for audits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    /// Planted community of each node, indexed by node label.
    pub node_community: Vec<u32>,
    /// One mechanism code per emitted edge, in stream order.
    pub mechanisms: String,
    /// Additions dropped because no valid target was found.
    pub skipped_additions: usize,
}

impl GroundTruth {
    pub fn mechanism(&self, k: usize) -> Option<Mechanism> {
        self.mechanisms.chars().nth(k).and_then(Mechanism::from_code)
    }

    pub fn mechanism_list(&self) -> Vec<Mechanism> {
        self.mechanisms.chars().filter_map(Mechanism::from_code).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutput {
    /// Edges in creation order; node labels are the decimal node index.
    pub edges: Vec<EdgeRecord>,
    pub nodes: Vec<NodeMeta>,
    pub truth: GroundTruth,
}

/// Addition times of one ego.
fn schedule(cfg: &SynthConfig, ego: usize, registered_at: Timestamp) -> Vec<Timestamp> {
    let s = &cfg.sessions;
    let mut rng = rng_for(cfg.seed, derive_seed(0x5E55, ego as u64));
    let sizes = BatchSizes::new(s.batch_size_gamma, s.batch_size_max);
    let gaps = CutoffPowerLaw::new(s.gap_gamma, s.gap_min_hours, s.gap_cutoff_hours);
    let end = cfg.end();
    let mut out = Vec::new();
    let mut t = registered_at + rng.random_range(0..3600);
    let mut day = Timestamp::MIN;
    let mut today = 0;
    while t < end && out.len() < cfg.max_out_degree {
        let size = sizes.sample(&mut rng);
        for k in 0..size {
            if k > 0 {
                t += rng.random_range(s.intra_gap_min..=s.intra_gap_max);
            }
            if t >= end || out.len() >= cfg.max_out_degree {
                break;
            }
            let d = t.div_euclid(DAY);
            if d != day {
                day = d;
                today = 0;
            }
            if cfg.daily_cap == 0 || today < cfg.daily_cap {
                out.push(t);
                today += 1;
            }
        }
        let mut gap = gaps.sample(&mut rng) * 3600.0;
        if let Some(scale) = cfg.age_scale_days {
            let age = (t - registered_at) as f64 / DAY as f64;
            gap *= 1.0 + age / scale;
        }
        t += gap.round().max(1.0) as Timestamp;
    }
    out
}

struct EgoCommunities {
    /// (community, quota, linked)
    plan: Vec<(u32, usize, usize)>,
    opened: usize,
}

struct State<'a> {
    cfg: &'a SynthConfig,
    registered_at: &'a [Timestamp],
    by_registration: Vec<u32>,
    n_registered: usize,
    community_members: Vec<Vec<u32>>,
    node_community: &'a [u32],
    out: Vec<Vec<u32>>,
    indeg: Vec<u32>,
    linked: HashSet<u64>,
    targets: Vec<u32>,
    ego_comms: HashMap<u32, EgoCommunities>,
    /// Scratch for common-neighbor counts; all zero between calls.
    cn: Vec<u32>,
    touched: Vec<u32>,
}

const ATTEMPTS: usize = 20;

impl State<'_> {
    fn follows(&self, i: u32, j: u32) -> bool {
        self.linked.contains(&((i as u64) << 32 | j as u64))
    }

    fn valid(&self, ego: u32, j: u32, t: Timestamp) -> bool {
        j != ego && self.registered_at[j as usize] <= t && !self.follows(ego, j)
    }

    fn uniform(&self, ego: u32, t: Timestamp, rng: &mut impl Rng) -> Option<u32> {
        if self.n_registered == 0 {
            return None;
        }
        (0..ATTEMPTS)
            .map(|_| self.by_registration[rng.random_range(0..self.n_registered)])
            .find(|&j| self.valid(ego, j, t))
            .or_else(|| {
                let rest: Vec<u32> = self.by_registration[..self.n_registered]
                    .iter()
                    .copied()
                    .filter(|&j| self.valid(ego, j, t))
                    .collect();
                (!rest.is_empty()).then(|| rest[rng.random_range(0..rest.len())])
            })
    }

    fn preferential(&self, ego: u32, t: Timestamp, rng: &mut impl Rng) -> Option<u32> {
        if self.targets.is_empty() {
            return self.uniform(ego, t, rng);
        }
        (0..ATTEMPTS)
            .map(|_| self.targets[rng.random_range(0..self.targets.len())])
            .find(|&j| self.valid(ego, j, t))
            .or_else(|| self.uniform(ego, t, rng))
    }

    fn triadic(&self, ego: u32, t: Timestamp, rng: &mut impl Rng) -> Option<u32> {
        let friends = &self.out[ego as usize];
        if !friends.is_empty() {
            for _ in 0..ATTEMPTS {
                let l = friends[rng.random_range(0..friends.len())];
                let fl = &self.out[l as usize];
                if fl.is_empty() {
                    continue;
                }
                let j = fl[rng.random_range(0..fl.len())];
                if self.valid(ego, j, t) {
                    return Some(j);
                }
            }
        }
        self.preferential(ego, t, rng)
    }

    /// Picks a target in the ego's community schedule; returns the
    /// community so the schedule advances only on success.
    fn community(&mut self, ego: u32, t: Timestamp, rng: &mut impl Rng) -> Option<(u32, u32)> {
        let plan_cfg = &self.cfg.communities;
        let n_comm = self.community_members.len() as u32;
        let own = self.node_community[ego as usize];
        let ec = self.ego_comms.entry(ego).or_insert_with(|| {
            let mut all: Vec<u32> = (0..n_comm).filter(|&c| c != own).collect();
            all.shuffle(rng);
            EgoCommunities {
                plan: plan_cfg.quotas.iter().zip(all).map(|(&q, c)| (c, q, 0)).collect(),
                opened: 1,
            }
        });
        let open: Vec<usize> = (0..ec.opened).filter(|&k| ec.plan[k].2 < ec.plan[k].1).collect();
        let k = if open.is_empty() {
            if ec.opened == ec.plan.len() {
                let used: HashSet<u32> = ec.plan.iter().map(|p| p.0).collect();
                let fresh: Vec<u32> = (0..n_comm).filter(|c| *c != own && !used.contains(c)).collect();
                let c = *fresh.get(rng.random_range(0..fresh.len().max(1)))?;
                let q = *plan_cfg.quotas.last().unwrap();
                ec.plan.push((c, q, 0));
            }
            ec.opened += 1;
            ec.opened - 1
        } else {
            open[rng.random_range(0..open.len())]
        };
        let c = ec.plan[k].0;
        let members = &self.community_members[c as usize];
        let j = (0..ATTEMPTS)
            .map(|_| members[rng.random_range(0..members.len())])
            .find(|&j| j != ego && self.registered_at[j as usize] <= t && !self.linked.contains(&((ego as u64) << 32 | j as u64)))?;
        let ec = self.ego_comms.get_mut(&ego).unwrap();
        ec.plan[k].2 += 1;
        let newest = ec.opened - 1;
        let (_, q, l) = ec.plan[newest];
        if ec.opened < ec.plan.len() && l as f64 >= (plan_cfg.open_fraction * q as f64).ceil() {
            ec.opened += 1;
        }
        Some((j, c))
    }

    fn max_cn_fof(&mut self, ego: u32) -> Option<u32> {
        let mut touched = std::mem::take(&mut self.touched);
        for &l in &self.out[ego as usize] {
            for &j in &self.out[l as usize] {
                if self.cn[j as usize] == 0 {
                    touched.push(j);
                }
                self.cn[j as usize] += 1;
            }
        }
        let mut best: Option<(u32, u32, u32)> = None;
        for &j in &touched {
            let c = std::mem::take(&mut self.cn[j as usize]);
            if j == ego || self.follows(ego, j) {
                continue;
            }
            let key = (c, self.indeg[j as usize], j);
            let better = match best {
                None => true,
                Some((bc, bd, bj)) => (c, key.1) > (bc, bd) || ((c, key.1) == (bc, bd) && j < bj),
            };
            if better {
                best = Some(key);
            }
        }
        touched.clear();
        self.touched = touched;
        best.map(|b| b.2)
    }

    fn link(&mut self, ego: u32, j: u32) {
        self.linked.insert((ego as u64) << 32 | j as u64);
        self.out[ego as usize].push(j);
        self.indeg[j as usize] += 1;
        self.targets.push(j);
    }
}

/// Runs the generator. Deterministic for a fixed config.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    cfg.validate()?;
    let n = cfg.n_egos;
    let registered_at: Vec<Timestamp> = (0..n)
        .map(|v| {
            let mut rng = rng_for(cfg.seed, derive_seed(0x4E6, v as u64));
            cfg.start + rng.random_range(0..(cfg.registration_span_days * DAY).max(1))
        })
        .collect();

    let n_comm = (n / cfg.communities.community_size.max(1)).max(1);
    let mut perm: Vec<u32> = (0..n as u32).collect();
    perm.shuffle(&mut rng_for(cfg.seed, 0xC0));
    let mut node_community = vec![0u32; n];
    let mut community_members = vec![Vec::new(); n_comm];
    for (pos, &v) in perm.iter().enumerate() {
        let c = (pos / cfg.communities.community_size.max(1)).min(n_comm - 1);
        node_community[v as usize] = c as u32;
        community_members[c].push(v);
    }

    let schedules: Vec<Vec<Timestamp>> = (0..n)
        .into_par_iter()
        .map(|v| schedule(cfg, v, registered_at[v]))
        .collect();
    let mut events: Vec<(Timestamp, u32, u32)> = schedules
        .iter()
        .enumerate()
        .flat_map(|(v, ts)| ts.iter().enumerate().map(move |(k, &t)| (t, v as u32, k as u32)))
        .collect();
    events.sort_unstable();

    let mut by_registration: Vec<u32> = (0..n as u32).collect();
    by_registration.sort_by_key(|&v| (registered_at[v as usize], v));
    let mut st = State {
        cfg,
        registered_at: &registered_at,
        by_registration,
        n_registered: 0,
        community_members,
        node_community: &node_community,
        out: vec![Vec::new(); n],
        indeg: vec![0; n],
        linked: HashSet::with_capacity(events.len()),
        targets: Vec::with_capacity(events.len()),
        ego_comms: HashMap::new(),
        cn: vec![0; n],
        touched: Vec::new(),
    };

    let mix = &cfg.mix;
    let mut edges = Vec::with_capacity(events.len());
    let mut mechanisms = String::with_capacity(events.len());
    let mut skipped = 0;
    for &(t, ego, k) in &events {
        while st.n_registered < n && registered_at[st.by_registration[st.n_registered] as usize] <= t {
            st.n_registered += 1;
        }
        let mut rng = rng_for(cfg.seed, derive_seed_from(0xADD, [ego as u64, k as u64]));
        let mut chosen: Option<(u32, Mechanism)> = None;
        if cfg.recommender.enabled && rng.random::<f64>() < cfg.recommender.probability {
            let pick = match cfg.recommender.policy {
                RecommenderPolicy::MaxCnFof => st.max_cn_fof(ego),
                RecommenderPolicy::Uniform => st.uniform(ego, t, &mut rng),
            };
            chosen = pick.map(|j| (j, Mechanism::Recommender));
        }
        if chosen.is_none() {
            let u = rng.random::<f64>();
            chosen = if u < mix.preferential {
                st.preferential(ego, t, &mut rng).map(|j| (j, Mechanism::Preferential))
            } else if u < mix.preferential + mix.triadic {
                st.triadic(ego, t, &mut rng).map(|j| (j, Mechanism::Triadic))
            } else if u < mix.preferential + mix.triadic + mix.community {
                match st.community(ego, t, &mut rng) {
                    Some((j, _)) => Some((j, Mechanism::Community)),
                    None => st.preferential(ego, t, &mut rng).map(|j| (j, Mechanism::Preferential)),
                }
            } else {
                st.uniform(ego, t, &mut rng).map(|j| (j, Mechanism::Uniform))
            };
        }
        let Some((j, mech)) = chosen else {
            skipped += 1;
            continue;
        };
        st.link(ego, j);
        let origin = if mech == Mechanism::Recommender {
            Origin::Recommended
        } else {
            Origin::Spontaneous
        };
        edges.push(EdgeRecord::new(ego.to_string(), j.to_string(), t).with_origin(origin));
        mechanisms.push(mech.code());
    }

    let nodes = (0..n)
        .map(|v| NodeMeta {
            node: v.to_string(),
            registered_at: registered_at[v],
        })
        .collect();
    Ok(SynthOutput {
        edges,
        nodes,
        truth: GroundTruth {
            config: cfg.clone(),
            node_community,
            mechanisms,
            skipped_additions: skipped,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_egos: 300,
            horizon_days: 60,
            registration_span_days: 20,
            communities: CommunityPlan {
                community_size: 30,
                ..CommunityPlan::default()
            },
            ..SynthConfig::default()
        }
    }

    #[test]
    fn empty_population() {
        let out = generate(&SynthConfig {
            n_egos: 0,
            ..SynthConfig::default()
        })
        .unwrap();
        assert!(out.edges.is_empty() && out.nodes.is_empty());
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        assert!(!a.edges.is_empty());
        assert_eq!(a.edges.len(), a.truth.mechanisms.len());
    }

    #[test]
    fn invalid_configs() {
        let mut c = small();
        c.mix.uniform = 0.5;
        assert!(matches!(c.validate(), Err(SynthError::Invalid(_))));
        let mut c = small();
        c.recommender.probability = 1.5;
        assert!(c.validate().is_err());
        let mut c = small();
        c.communities.community_size = 4;
        assert!(matches!(c.validate(), Err(SynthError::Infeasible(_))));
    }

    #[test]
    fn rho_extremes() {
        let mut c = small();
        c.recommender.probability = 0.0;
        let out = generate(&c).unwrap();
        assert!(out.edges.iter().all(|e| e.origin == Origin::Spontaneous));
        c.recommender.probability = 1.0;
        c.recommender.policy = RecommenderPolicy::Uniform;
        c.registration_span_days = 0;
        let out = generate(&c).unwrap();
        assert!(out.edges.iter().all(|e| e.origin == Origin::Recommended));
    }
}
