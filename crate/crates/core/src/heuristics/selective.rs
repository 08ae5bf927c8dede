use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::channel::{tx_gain_dbi, RadioParams};
use crate::graph::{Link, MeasurementGraph, NodeId};
use crate::instance::ProblemInstance;
use crate::milp::{solve_problem, MilpBackend, SolveStatus, SolverOptions};
use crate::oracle::validate_solution;
use crate::solution::{NetworkSolution, ProblemKind};

use super::HeuristicError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneParams {
    pub k0: usize,
    pub k_max: usize,
    pub step: usize,
}

impl Default for PruneParams {
    fn default() -> Self {
        Self { k0: 5, k_max: 10, step: 1 }
    }
}

impl PruneParams {
    pub fn validate(&self) -> Result<(), HeuristicError> {
        if self.k0 < 1 || self.k0 > self.k_max || self.step < 1 {
            return Err(HeuristicError::BadParams(format!("need 1 <= k0 <= k_max and step >= 1, got {self:?}")));
        }
        Ok(())
    }
}

/// Wireless edges by descending gain minus pathloss, ties by (src, dst).
pub fn rank_edges(graph: &MeasurementGraph, radio: &RadioParams) -> Vec<(Link, f64)> {
    let mut ranked: Vec<(Link, f64)> = graph
        .wireless_edges()
        .map(|(_, e)| {
            let tx = graph.node(e.src).expect("edge endpoints exist");
            let rx = graph.node(e.dst).expect("edge endpoints exist");
            let g = tx_gain_dbi(tx, rx, radio) + radio.g_rx_main_dbi;
            (e.link(), g - e.pathloss_db.unwrap_or(f64::INFINITY))
        })
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    ranked
}

/// Keeps the `k` best-ranked incoming wireless edges of every node and all
/// wired edges.
pub fn prune_graph(graph: &MeasurementGraph, radio: &RadioParams, k: usize) -> Result<MeasurementGraph, HeuristicError> {
    if k < 1 {
        return Err(HeuristicError::BadParams("k must be at least 1".into()));
    }
    let mut kept: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut keep: BTreeSet<Link> = BTreeSet::new();
    for (l, _) in rank_edges(graph, radio) {
        let n = kept.entry(l.dst).or_default();
        if *n < k {
            *n += 1;
            keep.insert(l);
        }
    }
    let edges = graph.edges().iter().filter(|e| !e.is_wireless() || keep.contains(&e.link())).cloned().collect();
    Ok(graph.with_edges(edges)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub k: usize,
    pub status: SolveStatus,
    pub runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct SelectiveOutcome {
    pub solution: NetworkSolution,
    pub k: usize,
    pub attempts: Vec<Attempt>,
}

/// Solves `problem` on pruned graphs of growing retention count until one is
/// feasible. The result is checked against the unpruned instance.
pub fn selective_reduction(
    instance: &ProblemInstance,
    params: &PruneParams,
    problem: ProblemKind,
    solver: &SolverOptions,
    backend: &dyn MilpBackend,
) -> Result<SelectiveOutcome, HeuristicError> {
    params.validate()?;
    let mut attempts = Vec::new();
    let mut k = params.k0;
    while k <= params.k_max {
        let pruned = instance.with_graph(prune_graph(&instance.graph, &instance.radio, k)?);
        let out = solve_problem(&pruned, problem, solver, backend)?;
        attempts.push(Attempt { k, status: out.status, runtime_s: out.runtime_s });
        match out.solution {
            Some(solution) => {
                let report = validate_solution(instance, &solution);
                if !report.ok {
                    return Err(HeuristicError::BadParams(format!("pruned solution invalid on the full graph: {:?}", report.violations)));
                }
                return Ok(SelectiveOutcome { solution, k, attempts });
            }
            None if out.status == SolveStatus::Infeasible => k += params.step,
            None => return Err(HeuristicError::NoSolutionWithinTime { k }),
        }
    }
    Err(HeuristicError::NoFeasibleWithinKmax { k_max: params.k_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, Node};

    fn star(n: u32) -> MeasurementGraph {
        let mut nodes = vec![Node::donor(0, 0, [0.0, 0.0, 10.0]), Node::ue(100, [30.0, 0.0, 1.5], false)];
        let mut edges = vec![];
        for i in 0..n {
            let f = 1 + i;
            nodes.push(Node::frontend(f, 0, [0.0, 0.0, 10.0], 0.0));
            edges.push(Edge::wired(0, f));
            edges.push(Edge::wireless(f, 100, 90.0 + i as f64, true));
        }
        MeasurementGraph::build(nodes, edges).unwrap()
    }

    #[test]
    fn metric_is_gain_minus_pathloss() {
        let g = star(1);
        let r = rank_edges(&g, &RadioParams::default());
        assert_eq!(r.len(), 1);
        assert!((r[0].1 - (24.0 + 0.0 - 90.0)).abs() < 1e-12);
    }

    #[test]
    fn pruning_keeps_top_k_and_wired() {
        let g = star(3);
        let p = prune_graph(&g, &RadioParams::default(), 2).unwrap();
        assert_eq!(p.in_degree(NodeId(100)), 2);
        assert!(p.edge(Link::new(NodeId(1), NodeId(100))).is_some());
        assert!(p.edge(Link::new(NodeId(3), NodeId(100))).is_none());
        assert_eq!(p.edges().iter().filter(|e| !e.is_wireless()).count(), 3);
        assert_eq!(prune_graph(&g, &RadioParams::default(), 3).unwrap(), g);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(PruneParams { k0: 0, k_max: 3, step: 1 }.validate().is_err());
        assert!(PruneParams { k0: 4, k_max: 3, step: 1 }.validate().is_err());
        assert!(PruneParams::default().validate().is_ok());
    }
}
