//! Brute-force optima for small instances and full re-validation of
//! solutions against the constraint set.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{frontend_power, total_power};
use crate::graph::{validate_tree, EdgeKind, Link, MeasurementGraph, NodeId, NodeKind, TreeViolationKind};
use crate::instance::{PowerDomain, ProblemInstance};
use crate::solution::{NetworkSolution, ProblemKind};

/// Configurations beyond this count are refused.
pub const ENUMERATION_GUARD: u128 = 1_000_000;
const TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("link {0} carries traffic but has zero capacity")]
    ZeroCapacityLink(Link),
    #[error("UE {0} is not reached by the tree")]
    UnreachedUe(NodeId),
    #[error("{0} configurations exceed the enumeration guard")]
    TooLarge(u128),
    #[error("no feasible configuration")]
    NoFeasible,
    #[error("frontend {0} has a continuous power domain")]
    NotEnumerable(NodeId),
    #[error(transparent)]
    Instance(#[from] crate::instance::InstanceError),
}

/// Number of UEs of `ue_set` below each wireless link of a tree.
fn downstream_counts(graph: &MeasurementGraph, tree: &[Link], ue_set: &[NodeId]) -> Result<BTreeMap<Link, usize>, OracleError> {
    let parent: BTreeMap<NodeId, Link> = tree.iter().map(|l| (l.dst, *l)).collect();
    let donor = graph.donor().id;
    let mut counts = BTreeMap::new();
    for &ue in ue_set {
        let mut v = ue;
        let mut hops = 0;
        while v != donor {
            let l = *parent.get(&v).ok_or(OracleError::UnreachedUe(ue))?;
            if graph.edge(l).is_some_and(|e| e.is_wireless()) {
                *counts.entry(l).or_insert(0) += 1;
            }
            v = l.src;
            hops += 1;
            if hops > tree.len() {
                return Err(OracleError::UnreachedUe(ue));
            }
        }
    }
    Ok(counts)
}

fn airtime_feasible(z: f64, counts: &BTreeMap<Link, usize>, capacities: &BTreeMap<Link, f64>) -> bool {
    let mut load: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (l, &n) in counts {
        let a = z * n as f64 / capacities[l];
        *load.entry(l.src).or_default() += a;
        *load.entry(l.dst).or_default() += a;
    }
    load.values().all(|&x| x <= 1.0)
}

/// Max-min rate on a fixed tree with fixed link capacities, by bisection on
/// the per-node airtime budget.
pub fn max_min_on_tree(graph: &MeasurementGraph, tree: &[Link], capacities: &BTreeMap<Link, f64>, ue_set: &[NodeId]) -> Result<f64, OracleError> {
    let counts = downstream_counts(graph, tree, ue_set)?;
    if counts.is_empty() {
        return Ok(0.0);
    }
    for l in counts.keys() {
        if !(capacities.get(l).copied().unwrap_or(0.0) > 0.0) {
            return Err(OracleError::ZeroCapacityLink(*l));
        }
    }
    let mut lo = 0.0;
    let mut hi = counts.keys().map(|l| capacities[l]).fold(f64::INFINITY, f64::min);
    if airtime_feasible(hi, &counts, capacities) {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if airtime_feasible(mid, &counts, capacities) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Best configuration found by enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptimum {
    pub objective: f64,
    pub powers_mw: BTreeMap<NodeId, f64>,
    /// Chosen incoming wireless link per routed node.
    pub parents: BTreeMap<NodeId, Link>,
}

fn power_options(domain: &PowerDomain, f: NodeId) -> Result<Vec<f64>, OracleError> {
    match domain {
        PowerDomain::Const(p) => Ok(vec![*p]),
        PowerDomain::Levels { levels_mw, allow_off } => {
            let mut v = if *allow_off { vec![0.0] } else { vec![] };
            v.extend(levels_mw.iter().copied());
            Ok(v)
        }
        PowerDomain::Continuous { .. } => Err(OracleError::NotEnumerable(f)),
    }
}

struct Space {
    frontends: Vec<NodeId>,
    power_opts: Vec<Vec<f64>>,
    /// (node, candidate parents; `None` = no parent)
    parent_opts: Vec<(NodeId, Vec<Option<Link>>)>,
    routed: Vec<(NodeId, f64)>,
}

fn space(instance: &ProblemInstance, problem: ProblemKind) -> Result<Space, OracleError> {
    let graph = &instance.graph;
    let domains = instance.power_domains(problem)?;
    let frontends = instance.frontends();
    let power_opts = frontends.iter().map(|f| power_options(&domains[f], *f)).collect::<Result<Vec<_>, _>>()?;
    let routed: Vec<(NodeId, f64)> = instance
        .commodities
        .iter()
        .filter(|c| problem == ProblemKind::Throughput || c.demand_mbps > 0.0)
        .map(|c| (c.dest, c.demand_mbps))
        .collect();
    let incoming = |v: NodeId| -> Vec<Link> {
        graph.in_edges(v).iter().map(|&e| &graph.edges()[e]).filter(|e| e.is_wireless()).map(|e| e.link()).collect()
    };
    let mut parent_opts = Vec::new();
    for (ue, _) in &routed {
        parent_opts.push((*ue, incoming(*ue).into_iter().map(Some).collect()));
    }
    if !routed.is_empty() {
        for n in graph.nodes_of(NodeKind::MtDu) {
            let mut opts: Vec<Option<Link>> = vec![None];
            opts.extend(incoming(n.id).into_iter().map(Some));
            parent_opts.push((n.id, opts));
        }
    }
    let total: u128 = power_opts.iter().map(|o| o.len() as u128).product::<u128>() * parent_opts.iter().map(|(_, o)| o.len().max(1) as u128).product::<u128>();
    if total > ENUMERATION_GUARD {
        return Err(OracleError::TooLarge(total));
    }
    Ok(Space { frontends, power_opts, parent_opts, routed })
}

/// Iterates a mixed-radix counter.
fn for_each_combo(radices: &[usize], mut f: impl FnMut(&[usize])) {
    if radices.iter().any(|&r| r == 0) {
        return;
    }
    let mut idx = vec![0usize; radices.len()];
    loop {
        f(&idx);
        let mut i = 0;
        loop {
            if i == radices.len() {
                return;
            }
            idx[i] += 1;
            if idx[i] < radices[i] {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Route of `ue` to the donor given parent choices; `None` on a dead end or cycle.
fn route(graph: &MeasurementGraph, parents: &BTreeMap<NodeId, Link>, ue: NodeId) -> Option<Vec<Link>> {
    let donor = graph.donor().id;
    let mut out = Vec::new();
    let mut v = ue;
    let mut seen = BTreeSet::new();
    while v != donor {
        if !seen.insert(v) {
            return None;
        }
        let n = graph.node(v)?;
        let up = if n.kind == NodeKind::Frontend {
            graph.in_edges(v).iter().map(|&e| &graph.edges()[e]).find(|e| e.kind == EdgeKind::Wired)?.link()
        } else {
            *parents.get(&v)?
        };
        out.push(up);
        v = up.src;
    }
    Some(out)
}

type Candidate = (f64, BTreeMap<NodeId, f64>, BTreeMap<NodeId, Link>);

fn enumerate(instance: &ProblemInstance, problem: ProblemKind) -> Result<Option<Candidate>, OracleError> {
    let sp = space(instance, problem)?;
    let graph = &instance.graph;
    let radices: Vec<usize> = sp.power_opts.iter().map(Vec::len).collect();
    let mut assignments = Vec::new();
    for_each_combo(&radices, |idx| {
        let p: BTreeMap<NodeId, f64> = sp.frontends.iter().zip(&sp.power_opts).zip(idx).map(|((&f, opts), &i)| (f, opts[i])).collect();
        assignments.push(p);
    });
    let parent_radices: Vec<usize> = sp.parent_opts.iter().map(|(_, o)| o.len()).collect();
    let ue_set: Vec<NodeId> = sp.routed.iter().map(|(u, _)| *u).collect();

    let best = assignments
        .into_par_iter()
        .filter_map(|powers| {
            let mut caps: BTreeMap<Link, f64> = BTreeMap::new();
            for (_, e) in graph.wireless_edges() {
                caps.insert(e.link(), instance.link_level(e.link(), &powers).capacity_mbps);
            }
            let mut local: Option<Candidate> = None;
            let better = |cand: f64, cur: &Option<Candidate>| match (problem, cur) {
                (_, None) => true,
                (ProblemKind::Throughput, Some((b, _, _))) => cand > *b,
                (ProblemKind::Energy, Some((b, _, _))) => cand < *b,
            };
            if sp.routed.is_empty() {
                if problem == ProblemKind::Energy {
                    let e = energy_of(instance, &powers, &BTreeMap::new());
                    return Some((e, powers, BTreeMap::new()));
                }
                return None;
            }
            for_each_combo(&parent_radices, |idx| {
                let mut parents = BTreeMap::new();
                for ((node, opts), &i) in sp.parent_opts.iter().zip(idx) {
                    if let Some(l) = opts[i] {
                        parents.insert(*node, l);
                    }
                }
                let mut routes = Vec::with_capacity(sp.routed.len());
                for &(ue, _) in &sp.routed {
                    match route(graph, &parents, ue) {
                        Some(r) => routes.push(r),
                        None => return,
                    }
                }
                match problem {
                    ProblemKind::Throughput => {
                        let tree: BTreeSet<Link> = routes.iter().flatten().copied().collect();
                        let tree: Vec<Link> = tree.into_iter().collect();
                        let z = match max_min_on_tree(graph, &tree, &caps, &ue_set) {
                            Ok(z) => z,
                            Err(OracleError::ZeroCapacityLink(_)) => 0.0,
                            Err(_) => return,
                        };
                        if better(z, &local) {
                            local = Some((z, powers.clone(), parents.clone()));
                        }
                    }
                    ProblemKind::Energy => {
                        let mut demand: BTreeMap<Link, f64> = BTreeMap::new();
                        for (r, &(_, d)) in routes.iter().zip(&sp.routed) {
                            for l in r {
                                if graph.edge(*l).is_some_and(|e| e.is_wireless()) {
                                    *demand.entry(*l).or_default() += d;
                                }
                            }
                        }
                        let mut alpha: BTreeMap<Link, f64> = BTreeMap::new();
                        let mut load: BTreeMap<NodeId, f64> = BTreeMap::new();
                        for (l, d) in &demand {
                            let c = caps[l];
                            if !(c > 0.0) {
                                return;
                            }
                            let a = d / c;
                            alpha.insert(*l, a);
                            *load.entry(l.src).or_default() += a;
                            *load.entry(l.dst).or_default() += a;
                        }
                        if load.values().any(|&x| x > 1.0) {
                            return;
                        }
                        let e = energy_of(instance, &powers, &alpha);
                        if better(e, &local) {
                            local = Some((e, powers.clone(), parents.clone()));
                        }
                    }
                }
            });
            local
        })
        .reduce_with(|a, b| {
            let take_b = match problem {
                ProblemKind::Throughput => b.0 > a.0,
                ProblemKind::Energy => b.0 < a.0,
            };
            if take_b {
                b
            } else {
                a
            }
        });
    Ok(best)
}

fn energy_of(instance: &ProblemInstance, powers: &BTreeMap<NodeId, f64>, alpha: &BTreeMap<Link, f64>) -> f64 {
    let pm = &instance.power_model;
    let mut units = BTreeSet::new();
    let mut total = 0.0;
    for (&f, &p) in powers {
        let a: f64 = alpha.iter().filter(|(l, _)| l.src == f).map(|(_, a)| a).sum();
        total += frontend_power(pm, p / 1000.0, a.min(1.0)).unwrap_or(f64::INFINITY);
        if p > 0.0 {
            units.insert(instance.unit_of(f));
        }
    }
    total + pm.unit_adder_w * units.len() as f64
}

/// Max-min rate over every power assignment and parent choice.
pub fn enumerate_optimal_throughput(instance: &ProblemInstance) -> Result<OracleOptimum, OracleError> {
    let (objective, powers_mw, parents) = enumerate(instance, ProblemKind::Throughput)?.unwrap_or((0.0, BTreeMap::new(), BTreeMap::new()));
    Ok(OracleOptimum { objective, powers_mw, parents })
}

/// Minimum network power over every power assignment, tree and routing that
/// carries all demands within the airtime budgets.
pub fn enumerate_optimal_energy(instance: &ProblemInstance) -> Result<OracleOptimum, OracleError> {
    let (objective, powers_mw, parents) = enumerate(instance, ProblemKind::Energy)?.ok_or(OracleError::NoFeasible)?;
    Ok(OracleOptimum { objective, powers_mw, parents })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    UnknownEdge,
    UnknownNode,
    InDegree,
    Cycle,
    Unreached,
    FlowConservation,
    FlowOffTree,
    AirtimeBudget,
    AirtimeRange,
    AirtimeOffTree,
    CapacityOverclaim,
    DemandUnmet,
    Activation,
    PowerRange,
    ObjectiveMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub location: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub recomputed_objective: Option<f64>,
}

fn tol_for(x: f64) -> f64 {
    TOL * x.abs().max(1.0)
}

/// Re-checks every constraint of a solution with independent arithmetic.
pub fn validate_solution(instance: &ProblemInstance, sol: &NetworkSolution) -> ValidationReport {
    let graph = &instance.graph;
    let mut v = Vec::new();
    let mut push = |rule, location: String, magnitude: f64| v.push(Violation { rule, location, magnitude });

    // frontends
    let listed: BTreeSet<NodeId> = sol.frontends.iter().map(|f| f.id).collect();
    for f in instance.frontends() {
        if !listed.contains(&f) {
            push(Rule::UnknownNode, format!("frontend {f} missing from solution"), 1.0);
        }
    }
    for f in &sol.frontends {
        if graph.node(f.id).map(|n| n.kind) != Some(NodeKind::Frontend) {
            push(Rule::UnknownNode, format!("frontend {}", f.id), 1.0);
        }
        let pmax = instance.radio.p_max_mw;
        if !(f.p_tx_mw >= 0.0) || f.p_tx_mw > pmax * (1.0 + TOL) {
            push(Rule::PowerRange, format!("frontend {}", f.id), (f.p_tx_mw - pmax).abs());
        }
        if f.active != (f.p_tx_mw > 0.0) {
            push(Rule::Activation, format!("frontend {}", f.id), 1.0);
        }
    }
    let powers = sol.powers_mw();

    // tree
    let required: Vec<NodeId> = instance
        .commodities
        .iter()
        .filter(|c| sol.problem == ProblemKind::Throughput || c.demand_mbps > 0.0)
        .map(|c| c.dest)
        .collect();
    let tree = validate_tree(graph, &sol.chosen_edges, &required);
    for t in &tree.violations {
        let rule = match t.kind {
            TreeViolationKind::UnknownEdge => Rule::UnknownEdge,
            TreeViolationKind::InDegree => Rule::InDegree,
            TreeViolationKind::Cycle => Rule::Cycle,
            TreeViolationKind::Unreached => Rule::Unreached,
        };
        push(rule, format!("node {}", t.node), 1.0);
    }
    let chosen: BTreeSet<Link> = sol.chosen_edges.iter().copied().collect();

    // airtime
    let mut budget: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut alpha: BTreeMap<Link, f64> = BTreeMap::new();
    for a in &sol.airtime {
        let l = a.link();
        if !(a.value >= -TOL) || a.value > 1.0 + TOL {
            push(Rule::AirtimeRange, l.to_string(), a.value);
        }
        let wireless = graph.edge(l).is_some_and(|e| e.is_wireless());
        if (!chosen.contains(&l) || !wireless) && a.value > TOL {
            push(Rule::AirtimeOffTree, l.to_string(), a.value);
        }
        *alpha.entry(l).or_default() += a.value;
        *budget.entry(l.src).or_default() += a.value;
        *budget.entry(l.dst).or_default() += a.value;
    }
    for (n, &b) in &budget {
        if b > 1.0 + TOL {
            push(Rule::AirtimeBudget, format!("node {n}"), b - 1.0);
        }
    }

    // flows
    let mut load: BTreeMap<Link, f64> = BTreeMap::new();
    let mut delivered: BTreeMap<NodeId, f64> = BTreeMap::new();
    let flow_of: BTreeMap<u32, &crate::solution::CommodityFlow> = sol.flows.iter().map(|f| (f.commodity, f)).collect();
    for c in &instance.commodities {
        let routed = sol.problem == ProblemKind::Throughput || c.demand_mbps > 0.0;
        let Some(flow) = flow_of.get(&c.id) else {
            if routed {
                push(Rule::DemandUnmet, format!("commodity {}", c.id), c.demand_mbps.max(1.0));
            }
            continue;
        };
        let weight = match sol.problem {
            ProblemKind::Throughput => 1.0,
            ProblemKind::Energy => c.demand_mbps,
        };
        let mut bal: BTreeMap<NodeId, f64> = BTreeMap::new();
        for lv in &flow.links {
            let l = lv.link();
            if graph.edge(l).is_none() {
                push(Rule::UnknownEdge, l.to_string(), 1.0);
                continue;
            }
            if lv.value.abs() > TOL && !chosen.contains(&l) {
                push(Rule::FlowOffTree, format!("commodity {} on {l}", c.id), lv.value);
            }
            if graph.node(l.dst).map(|n| n.kind) == Some(NodeKind::Ue) && l.dst != c.dest && lv.value.abs() > TOL {
                push(Rule::FlowConservation, format!("commodity {} enters UE {}", c.id, l.dst), lv.value);
            }
            *bal.entry(l.dst).or_default() += lv.value;
            *bal.entry(l.src).or_default() -= lv.value;
            if graph.edge(l).is_some_and(|e| e.is_wireless()) {
                *load.entry(l).or_default() += weight * lv.value;
            }
        }
        let inflow = bal.get(&c.dest).copied().unwrap_or(0.0);
        for (&n, &b) in &bal {
            if n != c.source && n != c.dest && b.abs() > tol_for(inflow) {
                push(Rule::FlowConservation, format!("commodity {} at node {n}", c.id), b.abs());
            }
        }
        let src_out = -bal.get(&c.source).copied().unwrap_or(0.0);
        if (src_out - inflow).abs() > tol_for(inflow) {
            push(Rule::FlowConservation, format!("commodity {} source/sink", c.id), (src_out - inflow).abs());
        }
        match sol.problem {
            ProblemKind::Throughput => {
                delivered.insert(c.dest, inflow);
                let claimed = sol.ue_rates.iter().find(|r| r.ue == c.dest).map(|r| r.rate_mbps);
                if let Some(r) = claimed {
                    if r > inflow + tol_for(inflow) {
                        push(Rule::DemandUnmet, format!("UE {} claims {r} but receives {inflow}", c.dest), r - inflow);
                    }
                }
            }
            ProblemKind::Energy => {
                if routed && (inflow - 1.0).abs() > TOL {
                    push(Rule::DemandUnmet, format!("commodity {}", c.id), (1.0 - inflow).abs());
                }
            }
        }
    }

    // capacity claims
    let claims: BTreeMap<Link, &crate::solution::LinkCapacity> = sol.capacities.iter().map(|c| (c.link(), c)).collect();
    for l in chosen.iter().filter(|l| graph.edge(**l).is_some_and(|e| e.is_wireless())) {
        let b = instance.gains.budget(*l, &powers);
        let direct = instance.table.capacity_from_sinr(b.signal_mw * (1.0 + TOL), b.interference_mw);
        let a = alpha.get(l).copied().unwrap_or(0.0);
        let (level, cap, thr) = match claims.get(l) {
            Some(c) => (c.level, c.capacity_mbps, c.throughput_mbps),
            None => (direct.level, direct.capacity_mbps, a * direct.capacity_mbps),
        };
        if level > direct.level {
            push(Rule::CapacityOverclaim, format!("{l} step {level:?} above SINR step {:?}", direct.level), cap - direct.capacity_mbps);
        }
        if (cap - instance.table.capacity_of(level)).abs() > tol_for(cap) {
            push(Rule::CapacityOverclaim, format!("{l} capacity does not match its step"), (cap - instance.table.capacity_of(level)).abs());
        }
        if thr > a * cap + tol_for(cap) {
            push(Rule::CapacityOverclaim, format!("{l} offered rate above airtime share"), thr - a * cap);
        }
        let used = load.get(l).copied().unwrap_or(0.0);
        if used > thr + tol_for(thr) {
            push(Rule::CapacityOverclaim, format!("{l} load above offered rate"), used - thr);
        }
    }

    // objective
    let recomputed = match sol.problem {
        ProblemKind::Throughput => instance.commodities.iter().map(|c| delivered.get(&c.dest).copied().unwrap_or(0.0)).reduce(f64::min),
        ProblemKind::Energy => match total_power(sol, &instance.power_model) {
            Ok(r) => Some(r.total_w),
            Err(e) => {
                push(Rule::Activation, e.to_string(), 1.0);
                None
            }
        },
    };
    if let Some(r) = recomputed {
        if (r - sol.objective).abs() > tol_for(r) {
            push(Rule::ObjectiveMismatch, "objective".into(), (r - sol.objective).abs());
        }
    }
    ValidationReport { ok: v.is_empty(), violations: v, recomputed_objective: recomputed }
}
