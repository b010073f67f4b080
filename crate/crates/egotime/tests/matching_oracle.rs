mod common;

use egotime::matching::{
    build_groups, group_outcomes, groups_disjoint, normalized_entropy, run_experiment, EvalStep, ExperimentOptions,
    MatchingGroup, TreatmentFilter,
};
use egotime::{EdgeRecord, NodeId, Origin, TimeGraph, DAY};
use rand::Rng;

use common::*;

#[test]
fn entropy_fixed_points() {
    assert_eq!(normalized_entropy(&["a"; 9]).unwrap(), 0.0);
    assert_eq!(normalized_entropy(&[1, 2, 3, 4, 5, 6, 7]).unwrap(), 1.0);
    assert_eq!(normalized_entropy(&["a", "a", "b", "b"]).unwrap(), 0.5);
    assert!(normalized_entropy(&[1]).is_err());
    assert!(normalized_entropy::<u8>(&[]).is_err());
}

#[test]
fn entropy_matches_counts_on_random_bags() {
    let mut r = rng(50);
    for _ in 0..10_000 {
        let n = r.random_range(2..60);
        let alphabet = r.random_range(1..=n);
        let bag: Vec<usize> = (0..n).map(|_| r.random_range(0..alphabet)).collect();
        let h = normalized_entropy(&bag).unwrap();
        assert!((0.0..=1.0).contains(&h));
        assert!((h - entropy_by_counts(&bag)).abs() < 1e-12, "{bag:?}");
    }
}

#[test]
fn planted_diversity_gap_is_detected() {
    let mut r = rng(51);
    let groups: Vec<MatchingGroup> = (0..200).map(|i| planted_group(&mut r, i, 10, 100, 10)).collect();
    let rep = run_experiment(&groups, 1, &ExperimentOptions::default()).unwrap();
    assert_eq!(rep.n_groups, 200);
    assert!(rep.difference.lo > 0.0, "{:?}", rep.difference);
    assert!(rep.mean_entropy_treatment.mean > rep.mean_entropy_control.mean);
}

#[test]
fn random_treatment_labels_give_a_null_difference() {
    let mut r = rng(52);
    let mut covers_zero = 0;
    for rep in 0..100 {
        let mut groups: Vec<MatchingGroup> = (0..200).map(|i| planted_group(&mut r, i, 10, 30, 30)).collect();
        for g in &mut groups {
            for m in &mut g.members {
                m.treated = r.random_bool(0.5);
            }
        }
        let opts = ExperimentOptions {
            seed: rep,
            ..ExperimentOptions::default()
        };
        let report = run_experiment(&groups, 1, &opts).unwrap();
        covers_zero += report.difference.contains(0.0) as usize;
    }
    assert!(covers_zero >= 93, "{covers_zero}/100");
}

#[test]
fn arm_size_rule_and_downsampling() {
    let mut r = rng(53);
    let small = planted_group(&mut r, 0, 4, 10, 10);
    let mut uneven = planted_group(&mut r, 1, 12, 10, 10);
    for m in uneven.members.iter_mut().take(5) {
        m.treated = false;
    }
    let (used, skipped) = group_outcomes(&[small.clone(), uneven.clone()], &ExperimentOptions::default());
    assert_eq!(skipped, 0);
    assert_eq!(used.len(), 1);
    assert_eq!((used[0].treatment_size, used[0].control_size), (7, 7));
    let opts = ExperimentOptions {
        downsample: false,
        ..ExperimentOptions::default()
    };
    let (used, _) = group_outcomes(&[uneven], &opts);
    assert_eq!((used[0].treatment_size, used[0].control_size), (7, 17));
    let opts = ExperimentOptions {
        min_arm: 4,
        ..ExperimentOptions::default()
    };
    assert_eq!(group_outcomes(&[small], &opts).0.len(), 1);
}

#[test]
fn treatment_filter_and_eval_step() {
    let mut r = rng(54);
    let mut g = planted_group(&mut r, 0, 10, 10, 10);
    for (k, m) in g.members.iter_mut().enumerate() {
        m.next_has_cn = k % 2 == 0;
        m.after_next = (k % 3 != 0).then_some(NodeId(7));
    }
    let with = |filter, step| ExperimentOptions {
        treatment_filter: filter,
        eval_step: step,
        downsample: false,
        min_arm: 2,
        ..ExperimentOptions::default()
    };
    let (u, _) = group_outcomes(std::slice::from_ref(&g), &with(TreatmentFilter::HasCn, EvalStep::Next));
    assert_eq!(u[0].treatment_size, 5);
    assert_eq!(u[0].control_size, 10);
    let (u, _) = group_outcomes(std::slice::from_ref(&g), &with(TreatmentFilter::Any, EvalStep::AfterNext));
    let t_after = g.treatment().filter(|m| m.after_next.is_some()).count();
    assert_eq!(u[0].treatment_size, t_after);
    assert_eq!(u[0].entropy_treatment, 0.0);
}

#[test]
fn groups_share_prefix_and_registration_window() {
    // six egos follow a, b then diverge; e5 registers 40 days later
    let mut recs = Vec::new();
    for (i, reg_day) in [0, 1, 2, 3, 4, 40].into_iter().enumerate() {
        let ego = format!("e{i}");
        let t = reg_day * DAY;
        recs.push(EdgeRecord::new(&ego, "a", t));
        recs.push(EdgeRecord::new(&ego, "b", t + 10));
        let mut next = EdgeRecord::new(&ego, format!("x{}", i % 3), t + 20);
        if i % 2 == 0 {
            next.origin = Origin::Recommended;
        }
        recs.push(next);
        recs.push(EdgeRecord::new(&ego, format!("y{i}"), t + 30));
    }
    // an ego with the prefix reversed is not a match
    recs.push(EdgeRecord::new("z", "b", 0));
    recs.push(EdgeRecord::new("z", "a", 10));
    recs.push(EdgeRecord::new("z", "c", 20));
    let (g, _) = TimeGraph::load(recs, Vec::new(), true).unwrap();
    let groups = build_groups(&g, 2, 30);
    assert_eq!(groups.len(), 1);
    let grp = &groups[0];
    let names: Vec<&str> = grp.members.iter().map(|m| g.label(m.ego)).collect();
    assert_eq!(names, ["e0", "e1", "e2", "e3", "e4"]);
    let prefix: Vec<&str> = grp.prefix.iter().map(|&n| g.label(n)).collect();
    assert_eq!(prefix, ["a", "b"]);
    assert_eq!(grp.treatment().count(), 3);
    for m in &grp.members {
        let i: usize = g.label(m.ego)[1..].parse().unwrap();
        assert_eq!(g.label(m.next), format!("x{}", i % 3));
        assert_eq!(g.label(m.after_next.unwrap()), format!("y{i}"));
    }
    assert!(groups_disjoint(&groups));
    // a window wider than 40 days takes in e5
    assert_eq!(build_groups(&g, 2, 41)[0].members.len(), 6);
    // k = 1 groups by first neighbor only: e0..e5 share a, z is alone
    let g1 = build_groups(&g, 1, 365);
    assert_eq!(g1.len(), 1);
    assert_eq!(g1[0].members.len(), 6);
}
