mod support;

use std::collections::BTreeSet;

use rbir::emd::EmdMetric;
use rbir::sgraph::{build_graph, estimate_theta, Assignment, SignatureGraph};
use rbir::signatures::{default_palette, ImageId};
use support::{brute_force_candidates, dummy, grouped_signatures, random_signatures, TableMetric};

#[test]
fn random_graph_satisfies_every_invariant() {
    let metric = EmdMetric::new(&default_palette());
    let sigs = random_signatures(3, 120);
    let theta = estimate_theta(&sigs, &metric, 100).unwrap();
    let graph = build_graph(sigs.clone(), theta, 4, &metric).unwrap();
    graph.check_invariants(Some(&metric)).unwrap();
    let members: BTreeSet<ImageId> = graph.clusters().iter().flat_map(|c| c.members.iter().map(|m| m.id)).collect();
    assert_eq!(members, sigs.iter().map(|s| s.id()).collect());
}

#[test]
fn search_matches_the_brute_force_rule() {
    let metric = EmdMetric::new(&default_palette());
    let sigs = random_signatures(5, 150);
    let theta = estimate_theta(&sigs, &metric, 100).unwrap();
    let graph = build_graph(sigs[..100].to_vec(), theta, 4, &metric).unwrap();
    assert!(!graph.edges().is_empty());
    for q in &sigs[100..] {
        let candidates = graph.search(q, &metric).unwrap();
        let got: BTreeSet<ImageId> = candidates.ids.iter().copied().collect();
        assert_eq!(got, brute_force_candidates(&graph, q, &metric));
        let result = graph.rank_results(&candidates, q, usize::MAX, &metric).unwrap();
        assert_eq!(result.ranked.len(), got.len());
        assert_eq!(result.emd_evaluations, graph.clusters().len() + got.len());
        for w in result.ranked.windows(2) {
            assert!(w[0].1 < w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
        }
    }
}

#[test]
fn separated_groups_keep_search_local() {
    let metric = EmdMetric::new(&default_palette());
    let sigs = grouped_signatures(&[0, 30, 6, 24], 25, 1);
    let theta = estimate_theta(&sigs, &metric, 100).unwrap();
    let graph = build_graph(sigs.clone(), theta, 2, &metric).unwrap();
    assert!(graph.clusters().len() >= 4);
    for q in sigs.iter().step_by(7) {
        let r = graph.query(q, 10, &metric).unwrap();
        assert!(r.member_evaluations <= sigs.len() / 2);
        assert_eq!(r.ranked[0].1, 0.0);
    }
}

#[test]
fn hand_traces_replay() {
    let metric = TableMetric::new(&[(1, 2, 7.0), (1, 3, 25.0), (1, 4, 15.0), (3, 4, 30.0), (2, 3, 24.0), (2, 4, 15.0)]);
    let mut g = SignatureGraph::new(10.0, 2).unwrap();
    assert_eq!(g.assign_image(dummy(1), &metric).unwrap(), Assignment::Seeded { cluster: 0 });
    assert_eq!(g.assign_image(dummy(2), &metric).unwrap(), Assignment::Joined { cluster: 0, distance: 7.0 });
    assert_eq!(g.assign_image(dummy(3), &metric).unwrap(), Assignment::NewCluster { cluster: 1, k: 1, edges: 0 });
    assert_eq!(
        g.assign_image(dummy(4), &metric).unwrap(),
        Assignment::ForceJoined { cluster: 0, distance: 15.0, stored: 10.0 }
    );
    assert_eq!(g.clamped_count(), 1);
    g.check_invariants(Some(&metric)).unwrap();
}
