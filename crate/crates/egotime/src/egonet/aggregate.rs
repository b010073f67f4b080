//! Population-level summaries of trajectories.

use serde::Serialize;
use thiserror::Error;

use super::{EgoTrajectory, TrajectoryStep};
use crate::stats::{least_squares, MeanCi, Moments, Proportion};
use crate::timegraph::Origin;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AggregateError {
    #[error("no trajectory qualifies for the requested cohort")]
    EmptyCohort,
    #[error("densification fit needs at least two distinct sizes with edges, found {0}")]
    DegenerateFit(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    GccRatio,
    Components,
    NetDistance,
    /// Indicator of `spawned_new_component`, from the second step on.
    SpawnProbability,
    DistanceDelta,
    Edges,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::GccRatio,
        Metric::Components,
        Metric::NetDistance,
        Metric::SpawnProbability,
        Metric::DistanceDelta,
        Metric::Edges,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::GccRatio => "gcc_ratio",
            Metric::Components => "n_components",
            Metric::NetDistance => "net_distance",
            Metric::SpawnProbability => "spawn_probability",
            Metric::DistanceDelta => "distance_delta",
            Metric::Edges => "edges",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == s)
    }

    fn value(self, s: &TrajectoryStep) -> Option<f64> {
        match self {
            Metric::GccRatio => Some(s.gcc_ratio),
            Metric::Components => Some(s.n_components as f64),
            Metric::NetDistance => s.net_distance,
            Metric::SpawnProbability => (s.n >= 2).then_some(s.spawned_new_component as u8 as f64),
            Metric::DistanceDelta => s.distance_delta,
            Metric::Edges => Some(s.edges as f64),
        }
    }
}

/// Which egos contribute to the per-`n` averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cohort {
    All,
    /// Only egos whose final size is at least `n_max`, so every `n` averages
    /// over the same population.
    ReachedNMax,
}

/// Restricts steps by the origin of the link that added the member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginSplit {
    All,
    /// Spontaneous and unknown origins.
    Spontaneous,
    Recommended,
}

impl OriginSplit {
    pub fn admits(self, o: Origin) -> bool {
        match self {
            OriginSplit::All => true,
            OriginSplit::Spontaneous => !o.is_recommended(),
            OriginSplit::Recommended => o.is_recommended(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub n: usize,
    pub value: MeanCi,
}

pub fn aggregate_trajectories(
    trajs: &[EgoTrajectory],
    metric: Metric,
    n_max: usize,
    cohort: Cohort,
) -> Result<Vec<AggregateRow>, AggregateError> {
    aggregate_trajectories_split(trajs, metric, n_max, cohort, OriginSplit::All)
}

/// Per-`n` mean and 95% CI of `metric` for `n` in `1..=n_max`. Sizes with no
/// observation are omitted.
pub fn aggregate_trajectories_split(
    trajs: &[EgoTrajectory],
    metric: Metric,
    n_max: usize,
    cohort: Cohort,
    split: OriginSplit,
) -> Result<Vec<AggregateRow>, AggregateError> {
    let members: Vec<&EgoTrajectory> = trajs
        .iter()
        .filter(|t| cohort == Cohort::All || t.final_size() >= n_max)
        .collect();
    if members.is_empty() {
        return Err(AggregateError::EmptyCohort);
    }
    let mut acc = vec![Moments::default(); n_max + 1];
    for t in members {
        for s in t.steps.iter().take(n_max) {
            if !split.admits(s.origin) {
                continue;
            }
            if let Some(v) = metric.value(s) {
                acc[s.n].push(v);
            }
        }
    }
    Ok(acc
        .iter()
        .enumerate()
        .filter_map(|(n, m)| m.ci().map(|value| AggregateRow { n, value }))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpawnRow {
    pub n: usize,
    pub spontaneous: Proportion,
    pub recommended: Proportion,
}

/// Per-`n` probability that the added member starts a new component, split by
/// the origin of the link that added it. Starts at `n = 2`.
pub fn spawn_probability_by_origin(trajs: &[EgoTrajectory]) -> Vec<SpawnRow> {
    let max_n = trajs.iter().map(|t| t.final_size()).max().unwrap_or(0);
    let mut rows: Vec<SpawnRow> = (0..=max_n)
        .map(|n| SpawnRow {
            n,
            spontaneous: Proportion::default(),
            recommended: Proportion::default(),
        })
        .collect();
    for t in trajs {
        for s in t.steps.iter().skip(1) {
            let row = &mut rows[s.n];
            if s.origin.is_recommended() {
                row.recommended.record(s.spawned_new_component);
            } else {
                row.spontaneous.record(s.spawned_new_component);
            }
        }
    }
    rows.into_iter().skip(2).collect()
}

/// Exponent of `|E| ~ |N|^gamma` fitted by least squares in log10 space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DensificationFit {
    pub gamma: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub n_points: usize,
}

/// Pools steps by size `n`, averages the edge count over steps with at least
/// one edge, and fits the log-log slope.
pub fn densification_fit(trajs: &[EgoTrajectory]) -> Result<DensificationFit, AggregateError> {
    let max_n = trajs.iter().map(|t| t.final_size()).max().unwrap_or(0);
    let mut acc = vec![Moments::default(); max_n + 1];
    for t in trajs {
        for s in &t.steps {
            if s.edges >= 1 {
                acc[s.n].push(s.edges as f64);
            }
        }
    }
    let points: Vec<(f64, f64)> = acc
        .iter()
        .enumerate()
        .filter_map(|(n, m)| m.mean().map(|e| (n as f64, e)))
        .collect();
    densification_fit_points(&points)
}

/// Fits `(size, edges)` points directly; points with non-positive values are
/// ignored.
pub fn densification_fit_points(points: &[(f64, f64)]) -> Result<DensificationFit, AggregateError> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, e)| *n > 0.0 && *e > 0.0)
        .map(|(n, e)| (n.log10(), e.log10()))
        .collect();
    let fit = least_squares(&logs).ok_or(AggregateError::DegenerateFit(logs.len()))?;
    Ok(DensificationFit {
        gamma: fit.slope,
        stderr: fit.slope_stderr,
        intercept: fit.intercept,
        n_points: fit.n_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timegraph::NodeId;

    fn step(n: usize, edges: usize, gcc: f64, spawned: bool, origin: Origin) -> TrajectoryStep {
        TrajectoryStep {
            n,
            added_node: NodeId(n as u32),
            added_at: n as i64,
            origin,
            edges,
            gcc_ratio: gcc,
            n_components: 1,
            net_distance: None,
            spawned_new_component: spawned,
            distance_delta: None,
        }
    }

    fn clique(size: usize) -> EgoTrajectory {
        EgoTrajectory {
            ego: NodeId(0),
            steps: (1..=size)
                .map(|n| step(n, n * (n - 1), 1.0, false, Origin::Spontaneous))
                .collect(),
        }
    }

    fn star(size: usize) -> EgoTrajectory {
        EgoTrajectory {
            ego: NodeId(1),
            steps: (1..=size)
                .map(|n| step(n, 0, 1.0 / n as f64, n >= 2, Origin::Recommended))
                .collect(),
        }
    }

    #[test]
    fn single_ego_is_identity() {
        let t = star(5);
        let rows = aggregate_trajectories(std::slice::from_ref(&t), Metric::GccRatio, 5, Cohort::All).unwrap();
        assert_eq!(rows.len(), 5);
        for (r, s) in rows.iter().zip(&t.steps) {
            assert_eq!(r.value.mean, s.gcc_ratio);
        }
    }

    #[test]
    fn cohort_larger_than_every_ego_errors() {
        let t = [star(3), clique(4)];
        assert_eq!(
            aggregate_trajectories(&t, Metric::GccRatio, 10, Cohort::ReachedNMax),
            Err(AggregateError::EmptyCohort)
        );
    }

    #[test]
    fn mixture_of_closed_forms() {
        // 3 cliques (gcc 1) and 1 star (gcc 1/n): mean = (3 + 1/n) / 4.
        let trajs = [clique(6), clique(6), clique(6), star(6)];
        let rows = aggregate_trajectories(&trajs, Metric::GccRatio, 6, Cohort::All).unwrap();
        for r in rows {
            let expected = (3.0 + 1.0 / r.n as f64) / 4.0;
            assert!((r.value.mean - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn reached_cohort_fixes_the_population() {
        let trajs = [clique(3), star(6)];
        let rows = aggregate_trajectories(&trajs, Metric::GccRatio, 6, Cohort::ReachedNMax).unwrap();
        assert!(rows.iter().all(|r| r.value.n == 1));
        let rows = aggregate_trajectories(&trajs, Metric::GccRatio, 6, Cohort::All).unwrap();
        assert_eq!(rows[0].value.n, 2);
        assert_eq!(rows[5].value.n, 1);
    }

    #[test]
    fn spawn_split_by_origin() {
        let rows = spawn_probability_by_origin(&[clique(4), star(4)]);
        assert_eq!(rows.first().unwrap().n, 2);
        for r in rows {
            assert_eq!(r.spontaneous.p(), Some(0.0));
            assert_eq!(r.recommended.p(), Some(1.0));
        }
    }

    #[test]
    fn identity_exponent() {
        let pts: Vec<(f64, f64)> = (1..100).map(|n| (n as f64, n as f64)).collect();
        let fit = densification_fit_points(&pts).unwrap();
        assert!((fit.gamma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fit() {
        assert_eq!(
            densification_fit_points(&[(5.0, 10.0), (5.0, 12.0)]),
            Err(AggregateError::DegenerateFit(2))
        );
        // Star trajectories never have edges.
        assert!(densification_fit(&[star(10)]).is_err());
    }

    #[test]
    fn clique_exponent_matches_regression_oracle() {
        // Independent two-pass regression on the closed form N(N-1), N = 10..=1000.
        let xs: Vec<f64> = (10..=1000).map(|n| (n as f64).log10()).collect();
        let ys: Vec<f64> = (10..=1000u64).map(|n| ((n * (n - 1)) as f64).log10()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let oracle = num / den;
        assert!((oracle - 2.008_355).abs() < 1e-5);

        let pts: Vec<(f64, f64)> = (10..=1000u64).map(|n| (n as f64, (n * (n - 1)) as f64)).collect();
        let fit = densification_fit_points(&pts).unwrap();
        assert!((fit.gamma - oracle).abs() < 1e-9);
    }
}
