use rayon::prelude::*;
use serde::Serialize;

use super::{Direction, Origin, Snapshot, TimeGraph, Timestamp};
use crate::stats::LogHistogram;
use crate::DAY;

/// Degree distributions of the snapshot at one instant.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DegreeStats {
    pub t: Timestamp,
    /// Nodes present at `t`: registered by then or touched by an edge.
    pub nodes: usize,
    pub edges: usize,
    pub mean_in: Option<f64>,
    pub mean_out: Option<f64>,
    pub in_hist: LogHistogram,
    pub out_hist: LogHistogram,
}

pub fn degree_stats(g: &TimeGraph, t: Timestamp) -> DegreeStats {
    let snap = Snapshot::AtOrBefore(t);
    let mut ins = Vec::new();
    let mut outs = Vec::new();
    for n in g.nodes() {
        let kin = g.degree_in(n, snap, Direction::In);
        let kout = g.degree_in(n, snap, Direction::Out);
        if g.registered_at(n) <= t || kin > 0 || kout > 0 {
            ins.push(kin as f64);
            outs.push(kout as f64);
        }
    }
    let edges = g.edges().partition_point(|e| e.created_at <= t);
    let nodes = ins.len();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    DegreeStats {
        t,
        nodes,
        edges,
        mean_in: mean(&ins),
        mean_out: mean(&outs),
        in_hist: LogHistogram::build(ins, LogHistogram::DEFAULT_BINS_PER_DECADE),
        out_hist: LogHistogram::build(outs, LogHistogram::DEFAULT_BINS_PER_DECADE),
    }
}

/// Link creations on one UTC day.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DayRow {
    /// Days since the epoch.
    pub day: i64,
    pub date: String,
    pub links: usize,
    pub triangle_closing: usize,
    pub recommended: usize,
    /// Links without origin information, reported separately.
    pub unknown: usize,
}

/// One row per UTC day from the first to the last edge, gaps included.
pub fn daily_timeline(g: &TimeGraph) -> Vec<DayRow> {
    let Some((first, last)) = g.time_span() else {
        return Vec::new();
    };
    let d0 = first.div_euclid(DAY);
    let d1 = last.div_euclid(DAY);
    let mut rows: Vec<DayRow> = (d0..=d1)
        .map(|day| DayRow {
            day,
            date: chrono::DateTime::from_timestamp(day * DAY, 0)
                .map(|dt| dt.date_naive().to_string())
                .unwrap_or_default(),
            links: 0,
            triangle_closing: 0,
            recommended: 0,
            unknown: 0,
        })
        .collect();
    let closing: Vec<bool> = g
        .edges()
        .par_iter()
        .map(|e| g.closes_directed_triangle(e.src, e.dst, e.created_at))
        .collect();
    for (e, closes) in g.edges().iter().zip(closing) {
        let row = &mut rows[(e.created_at.div_euclid(DAY) - d0) as usize];
        row.links += 1;
        row.triangle_closing += closes as usize;
        match e.origin {
            Origin::Recommended => row.recommended += 1,
            Origin::Unknown => row.unknown += 1,
            Origin::Spontaneous => {}
        }
    }
    rows
}
