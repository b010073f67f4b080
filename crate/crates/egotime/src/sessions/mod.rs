//! Link-creation sessions ("batches") and early-life activity.
//!
//! A batch is a maximal run of additions by one ego in which consecutive
//! additions are less than `timeout` apart; a gap of exactly `timeout` starts
//! a new batch.

mod powerlaw;

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

pub use powerlaw::{
    fit_power_law, fit_power_law_continuous, hurwitz_zeta, FitError, PowerLawFit, XMin, MIN_TAIL,
};

use crate::stats::{median, LogHistogram, MeanCi, Moments};
use crate::timegraph::{NodeId, TimeGraph, Timestamp};
use crate::DAY;

/// Default session timeout, 25 minutes.
pub const DEFAULT_TIMEOUT: Timestamp = 1500;

const HOUR: f64 = 3600.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Batch {
    pub ego: NodeId,
    pub batch_index: usize,
    pub start: Timestamp,
    pub end: Timestamp,
    pub size: usize,
    pub contains_recommended: bool,
    /// Hours from this batch's end to the next batch's start; `None` for the
    /// last batch of an ego.
    pub tau_hours: Option<f64>,
}

/// Splits one ego's sorted additions `(time, recommended)` into batches.
pub fn sessionize(ego: NodeId, events: &[(Timestamp, bool)], timeout: Timestamp) -> Vec<Batch> {
    let mut out: Vec<Batch> = Vec::new();
    for &(t, rec) in events {
        match out.last_mut() {
            Some(b) if t - b.end < timeout => {
                b.end = t;
                b.size += 1;
                b.contains_recommended |= rec;
            }
            _ => {
                if let Some(prev) = out.last_mut() {
                    prev.tau_hours = Some((t - prev.end) as f64 / HOUR);
                }
                out.push(Batch {
                    ego,
                    batch_index: out.len(),
                    start: t,
                    end: t,
                    size: 1,
                    contains_recommended: rec,
                    tau_hours: None,
                });
            }
        }
    }
    out
}

/// Additions of `ego` in creation order.
pub fn addition_events(g: &TimeGraph, ego: NodeId) -> Vec<(Timestamp, bool)> {
    g.out_edges(ego)
        .iter()
        .map(|&e| {
            let e = g.edge(e);
            (e.created_at, e.origin.is_recommended())
        })
        .collect()
}

/// Batches of every ego with at least one out-link, grouped by ego in node
/// order.
pub fn graph_batches(g: &TimeGraph, timeout: Timestamp) -> Vec<Batch> {
    let egos: Vec<NodeId> = g.nodes().filter(|&n| !g.out_edges(n).is_empty()).collect();
    egos.par_iter()
        .flat_map_iter(|&ego| sessionize(ego, &addition_events(g, ego), timeout))
        .collect()
}

/// Size and interarrival statistics of a set of batches.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchStats {
    pub batches: usize,
    pub mean_size: Option<MeanCi>,
    pub median_tau_hours: Option<f64>,
    pub size_distribution: LogHistogram,
    pub tau_distribution: LogHistogram,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchSummary {
    pub overall: BatchStats,
    /// Batches with at least one recommended link. Interarrivals are taken
    /// between consecutive batches of the same ego that both qualify.
    pub recommended: Option<BatchStats>,
}

fn stats_of(sizes: &[f64], taus: &[f64]) -> BatchStats {
    let m: Moments = sizes.iter().copied().collect();
    BatchStats {
        batches: sizes.len(),
        mean_size: m.ci(),
        median_tau_hours: median(taus),
        size_distribution: LogHistogram::build(sizes.iter().copied(), LogHistogram::DEFAULT_BINS_PER_DECADE),
        tau_distribution: LogHistogram::build(taus.iter().copied(), LogHistogram::DEFAULT_BINS_PER_DECADE),
    }
}

/// Summarises `batches` (grouped per ego, in batch order as produced by
/// [`sessionize`]).
pub fn batch_summary(batches: &[Batch], by_recommended: bool) -> BatchSummary {
    let sizes: Vec<f64> = batches.iter().map(|b| b.size as f64).collect();
    let taus: Vec<f64> = batches.iter().filter_map(|b| b.tau_hours).collect();
    let overall = stats_of(&sizes, &taus);
    let recommended = by_recommended.then(|| {
        let rs: Vec<f64> = batches
            .iter()
            .filter(|b| b.contains_recommended)
            .map(|b| b.size as f64)
            .collect();
        let rt: Vec<f64> = batches
            .windows(2)
            .filter(|w| w[0].ego == w[1].ego && w[0].contains_recommended && w[1].contains_recommended)
            .filter_map(|w| w[0].tau_hours)
            .collect();
        stats_of(&rs, &rt)
    });
    BatchSummary { overall, recommended }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAxis {
    BatchIndex,
    /// Whole days between the ego's registration and the batch start.
    EgoAgeDays,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SizePoint {
    pub x: i64,
    pub size: MeanCi,
}

/// Mean batch size per value of `axis`. `EgoAgeDays` needs the graph for
/// registration times.
pub fn batch_size_vs_time(batches: &[Batch], axis: TimeAxis, g: Option<&TimeGraph>) -> Vec<SizePoint> {
    let mut acc: BTreeMap<i64, Moments> = BTreeMap::new();
    for b in batches {
        let x = match axis {
            TimeAxis::BatchIndex => b.batch_index as i64,
            TimeAxis::EgoAgeDays => {
                let reg = g.map(|g| g.registered_at(b.ego)).unwrap_or(b.start);
                (b.start - reg).div_euclid(DAY)
            }
        };
        acc.entry(x).or_default().push(b.size as f64);
    }
    acc.into_iter()
        .filter_map(|(x, m)| m.ci().map(|size| SizePoint { x, size }))
        .collect()
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EarlyLifeError {
    #[error("no ego has link activity spanning at least {0} days")]
    NoQualifyingEgos(i64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EarlyLifeRow {
    pub day: i64,
    pub fraction: MeanCi,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EarlyLife {
    pub egos: usize,
    pub rows: Vec<EarlyLifeRow>,
}

/// Mean over egos of the fraction of final out-links created by the end of
/// day `d`, for `d` in `0..=window_days`. Day 0 starts at the ego's
/// registration. Only egos whose first and last link are at least
/// `min_lifespan_days` apart qualify.
pub fn early_life_fraction(
    g: &TimeGraph,
    window_days: i64,
    min_lifespan_days: i64,
) -> Result<EarlyLife, EarlyLifeError> {
    let per_ego: Vec<Vec<f64>> = g
        .nodes()
        .collect::<Vec<_>>()
        .par_iter()
        .filter_map(|&ego| {
            let out = g.out_edges(ego);
            let first = g.edge(*out.first()?).created_at;
            let last = g.edge(*out.last()?).created_at;
            if last - first < min_lifespan_days * DAY {
                return None;
            }
            let t0 = g.registered_at(ego).min(first);
            let total = out.len() as f64;
            let mut k = 0;
            Some(
                (0..=window_days)
                    .map(|d| {
                        let cut = t0 + (d + 1) * DAY;
                        while k < out.len() && g.edge(out[k]).created_at < cut {
                            k += 1;
                        }
                        k as f64 / total
                    })
                    .collect(),
            )
        })
        .collect();
    if per_ego.is_empty() {
        return Err(EarlyLifeError::NoQualifyingEgos(min_lifespan_days));
    }
    let rows = (0..=window_days)
        .filter_map(|d| {
            let m: Moments = per_ego.iter().map(|v| v[d as usize]).collect();
            m.ci().map(|fraction| EarlyLifeRow { day: d, fraction })
        })
        .collect();
    Ok(EarlyLife {
        egos: per_ego.len(),
        rows,
    })
}

/// Interarrival times binned to whole hours (at least one) for discrete fits.
pub fn tau_hours_binned(batches: &[Batch]) -> Vec<u64> {
    batches
        .iter()
        .filter_map(|b| b.tau_hours)
        .map(|h| (h.round() as u64).max(1))
        .collect()
}

/// Writes `ego,batch_index,start,end,size,contains_recommended,tau_hours`.
pub fn write_batches<W: Write>(g: &TimeGraph, batches: &[Batch], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["ego", "batch_index", "start", "end", "size", "contains_recommended", "tau_hours"])?;
    for b in batches {
        w.write_record([
            g.label(b.ego).to_string(),
            b.batch_index.to_string(),
            b.start.to_string(),
            b.end.to_string(),
            b.size.to_string(),
            b.contains_recommended.to_string(),
            b.tau_hours.map(|h| format!("{h:.6}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
