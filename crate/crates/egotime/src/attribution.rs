//! Tagging links that follow a recommender impression.

use std::collections::HashMap;

use serde::Serialize;

use crate::timegraph::{EdgeRecord, Impression, Origin, Timestamp};

/// Default attribution window, 10 minutes.
pub const DEFAULT_WINDOW: Timestamp = 600;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AttributionReport {
    pub recommended: usize,
    pub spontaneous: usize,
}

/// Sets every edge's origin: recommended iff the same `(user, candidate)`
/// pair was shown at some `t_imp` with `0 <= t - t_imp <= window`, otherwise
/// spontaneous.
pub fn attribute_origin(edges: &mut [EdgeRecord], impressions: &[Impression], window: Timestamp) -> AttributionReport {
    let mut shown: HashMap<(&str, &str), Vec<Timestamp>> = HashMap::new();
    for imp in impressions {
        shown
            .entry((imp.user.as_str(), imp.candidate.as_str()))
            .or_default()
            .push(imp.shown_at);
    }
    for v in shown.values_mut() {
        v.sort_unstable();
    }
    let mut report = AttributionReport::default();
    for e in edges.iter_mut() {
        let hit = shown.get(&(e.src.as_str(), e.dst.as_str())).is_some_and(|ts| {
            // Earliest impression at or after t - window; it must not be after t.
            let k = ts.partition_point(|&s| s < e.created_at.saturating_sub(window));
            ts.get(k).is_some_and(|&s| s <= e.created_at)
        });
        if hit {
            e.origin = Origin::Recommended;
            report.recommended += 1;
        } else {
            e.origin = Origin::Spontaneous;
            report.spontaneous += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn imp(at: Timestamp) -> Impression {
        Impression {
            user: "u".into(),
            candidate: "v".into(),
            shown_at: at,
        }
    }

    fn tag(lag: Timestamp) -> Origin {
        let mut e = vec![EdgeRecord::new("u", "v", 10_000)];
        attribute_origin(&mut e, &[imp(10_000 - lag)], DEFAULT_WINDOW);
        e[0].origin
    }

    #[test]
    fn window_rules() {
        assert_eq!(tag(300), Origin::Recommended);
        assert_eq!(tag(660), Origin::Spontaneous);
        assert_eq!(tag(-60), Origin::Spontaneous);
        assert_eq!(tag(0), Origin::Recommended);
        assert_eq!(tag(600), Origin::Recommended);
    }

    #[test]
    fn other_pairs_do_not_count() {
        let mut e = vec![EdgeRecord::new("u", "w", 100)];
        let r = attribute_origin(&mut e, &[imp(90)], DEFAULT_WINDOW);
        assert_eq!(r, AttributionReport { recommended: 0, spontaneous: 1 });
    }
}
