mod common;

use common::tiny_instance;
use iabnet::graph::{Edge, Link, MeasurementGraph, Node, NodeId};
use iabnet::heuristics::{
    local_search_energy, local_search_throughput, phase1_certificate, prune_graph, rank_edges, selective_reduction, HeuristicError, LocalSearchOptions,
    PruneParams,
};
use iabnet::milp::{solve_problem, HighsBackend, SolverOptions};
use iabnet::oracle::{enumerate_optimal_energy, enumerate_optimal_throughput, validate_solution};
use iabnet::solution::ProblemKind;
use proptest::prelude::*;

const TOL: f64 = 1e-6;

#[test]
fn local_search_throughput_is_sound() {
    let opts = LocalSearchOptions::default();
    for seed in 0..40 {
        let inst = tiny_instance(seed);
        let oracle = enumerate_optimal_throughput(&inst).unwrap().objective;
        match local_search_throughput(&inst, &opts, &HighsBackend) {
            Ok(out) => {
                assert!(validate_solution(&inst, &out.solution).ok, "seed {seed}");
                assert!(out.solution.objective <= oracle * (1.0 + TOL), "seed {seed}: {} > {oracle}", out.solution.objective);
                assert!(out.state.log_is_monotone(true), "seed {seed}");
                assert!((out.solution.objective - out.state.curr_best_obj).abs() <= TOL * oracle);
                let cert = phase1_certificate(&inst, &out.state.phase1_powers, out.state.phase1_objective, &opts.solver, &HighsBackend).unwrap();
                assert!(cert, "seed {seed}: phase-1 fixed point is not locally optimal");
            }
            Err(HeuristicError::NoFeasibleStart) => {}
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
}

#[test]
fn local_search_energy_is_sound() {
    let opts = LocalSearchOptions::default();
    let mut solved = 0;
    for seed in 0..40 {
        let inst = tiny_instance(seed);
        match local_search_energy(&inst, &opts, &HighsBackend) {
            Ok(out) => {
                solved += 1;
                let best = enumerate_optimal_energy(&inst).unwrap().objective;
                assert!(validate_solution(&inst, &out.solution).ok, "seed {seed}");
                assert!(out.solution.objective >= best * (1.0 - TOL), "seed {seed}: {} < {best}", out.solution.objective);
                assert!(out.state.log_is_monotone(false), "seed {seed}");
            }
            Err(HeuristicError::DemandExceedsMaxMin { .. }) | Err(HeuristicError::NoFeasibleStart) => {}
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    assert!(solved >= 20, "only {solved} energy runs succeeded");
}

#[test]
fn demand_at_max_min_fails_fast() {
    let inst = tiny_instance(3);
    let z = enumerate_optimal_throughput(&inst).unwrap().objective;
    let err = local_search_energy(&inst.with_demand(z), &LocalSearchOptions::default(), &HighsBackend).unwrap_err();
    assert!(matches!(err, HeuristicError::DemandExceedsMaxMin { .. }), "{err}");
}

#[test]
fn zero_demand_sleeps_everything() {
    let inst = tiny_instance(14).with_demand(0.0);
    let out = local_search_energy(&inst, &LocalSearchOptions::default(), &HighsBackend).unwrap();
    assert_eq!(out.solution.active_count(), 0);
    assert_eq!(out.state.log.len(), 1);
}

#[test]
fn selective_reduction_is_sound() {
    let solver = SolverOptions::default();
    for seed in 0..40 {
        let inst = tiny_instance(seed);
        for (problem, k0) in [(ProblemKind::Throughput, 1), (ProblemKind::Energy, 2)] {
            let params = PruneParams { k0, k_max: 4, step: 1 };
            let exact = solve_problem(&inst, problem, &solver, &HighsBackend).unwrap().objective();
            match selective_reduction(&inst, &params, problem, &solver, &HighsBackend) {
                Ok(out) => {
                    assert!(validate_solution(&inst, &out.solution).ok);
                    let exact = exact.expect("pruned feasible implies full feasible");
                    match problem {
                        ProblemKind::Throughput => assert!(out.solution.objective <= exact * (1.0 + TOL)),
                        ProblemKind::Energy => assert!(out.solution.objective >= exact * (1.0 - TOL)),
                    }
                }
                Err(HeuristicError::NoFeasibleWithinKmax { .. }) => assert!(exact.is_none(), "seed {seed}: k_max covers every in-degree"),
                Err(e) => panic!("seed {seed}: {e}"),
            }
        }
    }
}

/// One UE with six candidate parents of which only the sixth-ranked one is
/// powered; a separate frontend carries the backhaul to the other units.
fn sixth_edge_instance() -> iabnet::instance::ProblemInstance {
    let at = [0.0, 0.0, 10.0];
    let nodes = vec![
        Node::donor(0, 0, at),
        Node::mt_du(10, 1, at),
        Node::mt_du(30, 2, at),
        Node::ue(20, [50.0, 0.0, 1.5], false),
        Node::frontend(1, 0, at, 0.0),
        Node::frontend(2, 0, at, 0.0),
        Node::frontend(3, 0, at, 0.0),
        Node::frontend(11, 1, at, 0.0),
        Node::frontend(12, 1, at, 0.0),
        Node::frontend(13, 1, at, 0.0),
        Node::frontend(31, 2, at, 0.0),
    ];
    let mut edges: Vec<Edge> = [(0, 1), (0, 2), (0, 3), (10, 11), (10, 12), (10, 13), (30, 31)].into_iter().map(|(a, b)| Edge::wired(a, b)).collect();
    for (f, pl) in [(1, 80.0), (2, 81.0), (31, 82.0), (11, 83.0), (12, 84.0), (13, 85.0)] {
        edges.push(Edge::wireless(f, 20, pl, true));
    }
    edges.push(Edge::wireless(3, 10, 70.0, true));
    edges.push(Edge::wireless(3, 30, 70.0, true));
    let g = MeasurementGraph::build(nodes, edges).unwrap();
    let c = g.commodities(0.0);
    let powers = [1, 2, 3, 11, 12, 13, 31].into_iter().map(|f| (NodeId(f), if f == 3 || f == 13 { 6300.0 } else { 0.0 })).collect();
    iabnet::instance::ProblemInstance::new(
        g,
        c,
        Default::default(),
        iabnet::capacity::default_table(100.0, 4).unwrap(),
        Default::default(),
        iabnet::instance::PowerMode::Fixed { powers_mw: powers },
    )
    .unwrap()
}

#[test]
fn reduction_grows_k_until_feasible() {
    let inst = sixth_edge_instance();
    let ranked: Vec<Link> = rank_edges(&inst.graph, &inst.radio).into_iter().filter(|(l, _)| l.dst == NodeId(20)).map(|(l, _)| l).collect();
    assert_eq!(ranked[5], Link::new(NodeId(13), NodeId(20)));
    let solver = SolverOptions::default();
    let out = selective_reduction(&inst, &PruneParams { k0: 5, k_max: 10, step: 1 }, ProblemKind::Throughput, &solver, &HighsBackend).unwrap();
    assert_eq!(out.k, 6);
    assert_eq!(out.attempts.len(), 2);
    let err = selective_reduction(&inst, &PruneParams { k0: 1, k_max: 5, step: 2 }, ProblemKind::Throughput, &solver, &HighsBackend).unwrap_err();
    assert_eq!(err, HeuristicError::NoFeasibleWithinKmax { k_max: 5 });
}

#[test]
fn identity_pruning_matches_exact() {
    let solver = SolverOptions::default();
    for seed in 0..10 {
        let inst = tiny_instance(seed);
        let max_in = inst.graph.nodes().iter().map(|n| inst.graph.in_degree(n.id)).max().unwrap();
        assert_eq!(prune_graph(&inst.graph, &inst.radio, max_in).unwrap(), *inst.graph);
        let exact = solve_problem(&inst, ProblemKind::Throughput, &solver, &HighsBackend).unwrap().objective();
        let sr = selective_reduction(&inst, &PruneParams { k0: max_in, k_max: max_in, step: 1 }, ProblemKind::Throughput, &solver, &HighsBackend)
            .ok()
            .map(|o| o.solution.objective);
        assert_eq!(exact.is_some(), sr.is_some());
        if let (Some(a), Some(b)) = (exact, sr) {
            assert!((a - b).abs() <= TOL * a);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ranking_ignores_edge_order(seed in 0u64..1000, rot in 0usize..50) {
        let inst = tiny_instance(seed);
        let mut edges = inst.graph.edges().to_vec();
        let n = edges.len();
        edges.rotate_left(rot % n);
        edges.reverse();
        let shuffled = inst.graph.with_edges(edges).unwrap();
        prop_assert_eq!(rank_edges(&inst.graph, &inst.radio), rank_edges(&shuffled, &inst.radio));
    }

    #[test]
    fn pruned_graph_is_subgraph(seed in 0u64..1000, k in 1usize..4) {
        let inst = tiny_instance(seed);
        let p = prune_graph(&inst.graph, &inst.radio, k).unwrap();
        for e in p.edges() {
            prop_assert!(inst.graph.edge(e.link()).is_some());
        }
        for n in p.nodes() {
            let wireless_in = p.in_edges(n.id).iter().filter(|&&i| p.edges()[i].is_wireless()).count();
            prop_assert!(wireless_in <= k);
        }
    }
}
