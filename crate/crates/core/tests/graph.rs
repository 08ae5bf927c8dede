mod common;

use common::tiny_instance;
use iabnet::graph::{validate_tree, Link, MeasurementGraph, NodeId, TreeViolationKind};
use iabnet::oracle::enumerate_optimal_throughput;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip_is_lossless(seed in 0u64..10_000) {
        let g = tiny_instance(seed).graph.as_ref().clone();
        let text = g.to_json_string();
        let back = MeasurementGraph::from_json_str(&text).unwrap();
        prop_assert_eq!(back.to_json_string(), text);
        prop_assert_eq!(back.nodes(), g.nodes());
        for (a, b) in back.edges().iter().zip(g.edges()) {
            prop_assert_eq!(a.link(), b.link());
            if let (Some(x), Some(y)) = (a.pathloss_db, b.pathloss_db) {
                prop_assert!((x - y).abs() <= 5e-7);
            }
        }
    }

    #[test]
    fn oracle_trees_are_valid(seed in 0u64..2_000) {
        let inst = tiny_instance(seed);
        let opt = enumerate_optimal_throughput(&inst).unwrap();
        prop_assume!(opt.objective > 0.0);
        let mut edges: Vec<Link> = opt.parents.values().copied().collect();
        for l in opt.parents.values() {
            // wired hop into the serving frontend
            let wired = inst.graph.in_edges(l.src).iter().map(|&i| inst.graph.edges()[i].link()).find(|w| !inst.graph.edge(*w).unwrap().is_wireless());
            edges.extend(wired);
        }
        edges.sort();
        edges.dedup();
        let rep = validate_tree(&inst.graph, &edges, &inst.graph.ue_ids());
        prop_assert!(rep.ok, "{:?}", rep.violations);
    }
}

#[test]
fn second_parent_is_an_in_degree_violation() {
    let inst = (0..).map(tiny_instance).find(|i| i.graph.ue_ids().iter().any(|&u| i.graph.in_degree(u) >= 2)).unwrap();
    let ue = inst.graph.ue_ids().into_iter().find(|&u| inst.graph.in_degree(u) >= 2).unwrap();
    let parents: Vec<Link> = inst.graph.in_edges(ue).iter().map(|&i| inst.graph.edges()[i].link()).collect();
    let mut edges = parents.clone();
    for p in &parents {
        edges.extend(inst.graph.in_edges(p.src).iter().map(|&i| inst.graph.edges()[i].link()));
    }
    let rep = validate_tree(&inst.graph, &edges, &[ue]);
    assert!(rep.violations.iter().any(|v| v.kind == TreeViolationKind::InDegree && v.node == ue));
    let unknown = validate_tree(&inst.graph, &[Link::new(NodeId(999), ue)], &[ue]);
    assert!(unknown.violations.iter().any(|v| v.kind == TreeViolationKind::UnknownEdge));
}
