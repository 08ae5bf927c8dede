//! Turns raw backend values into a validated [`NetworkSolution`].

use std::collections::{BTreeMap, BTreeSet};

use crate::energy::total_power;
use crate::graph::{EdgeKind, Link, NodeId};
use crate::instance::ProblemInstance;
use crate::oracle::validate_solution;
use crate::solution::{CommodityFlow, FrontendState, LinkCapacity, LinkValue, NetworkSolution, ProblemKind, SolutionStatus, UeRate};

use super::backend::{RawSolution, SolveStatus};
use super::bigm::LevelFeasibility;
use super::ir::VarKind;
use super::model::{BuiltModel, PowerRepr};
use super::MilpError;

pub const BINARY_TOL: f64 = 1e-6;
/// Relative slack on the signal when re-checking a granted ladder step.
pub const SINR_REL_TOL: f64 = 1e-6;
pub const OBJECTIVE_REL_TOL: f64 = 1e-6;

fn mismatch(msg: impl Into<String>) -> MilpError {
    MilpError::ExtractionMismatch(msg.into())
}

pub fn extract_solution(built: &BuiltModel, raw: &RawSolution, instance: &ProblemInstance) -> Result<NetworkSolution, MilpError> {
    let status = match raw.status {
        SolveStatus::Optimal => SolutionStatus::Optimal,
        SolveStatus::Feasible { gap } => SolutionStatus::Feasible { gap },
        SolveStatus::Infeasible | SolveStatus::TimeLimit => return Err(mismatch("no primal solution to extract")),
    };
    let values = raw.values.as_ref().ok_or_else(|| mismatch("no primal solution to extract"))?;
    let ir = &built.ir;
    if values.len() != ir.num_vars() {
        return Err(mismatch("value vector length differs from the model"));
    }
    let mut x = values.clone();
    for (i, v) in ir.variables().iter().enumerate() {
        if v.kind == VarKind::Binary {
            let r = x[i].round();
            if (x[i] - r).abs() > BINARY_TOL {
                return Err(mismatch(format!("binary {} = {} is fractional", v.key, x[i])));
            }
            x[i] = r;
        }
    }
    let graph = &instance.graph;

    // powers and activations
    let mut powers = BTreeMap::new();
    for (&f, repr) in &built.powers {
        let p = match repr {
            PowerRepr::Const(p) => *p,
            PowerRepr::Levels(vars) => vars.iter().find(|(v, _)| x[v.0] == 1.0).map_or(0.0, |&(_, p)| p),
            PowerRepr::Continuous { x: xv, on, max_mw } => {
                if x[on.0] == 1.0 {
                    x[xv.0].clamp(0.0, 1.0) * max_mw
                } else {
                    0.0
                }
            }
        };
        powers.insert(f, p);
    }

    // parent pointers through chosen wireless links
    let mut parent: BTreeMap<NodeId, Link> = BTreeMap::new();
    for lv in &built.links {
        if x[lv.use_var.0] == 1.0 {
            let l = lv.link();
            if parent.insert(l.dst, l).is_some() {
                return Err(mismatch(format!("node {} has two chosen parents", l.dst)));
            }
        }
    }
    let donor = graph.donor().id;
    let route_of = |dest: NodeId| -> Result<Vec<Link>, MilpError> {
        let mut route = Vec::new();
        let mut v = dest;
        let mut seen = BTreeSet::new();
        while v != donor {
            if !seen.insert(v) {
                return Err(mismatch(format!("cycle above node {dest}")));
            }
            let node = graph.node(v).ok_or_else(|| mismatch("unknown node"))?;
            let up = if node.kind == crate::graph::NodeKind::Frontend {
                graph
                    .in_edges(v)
                    .iter()
                    .map(|&ei| &graph.edges()[ei])
                    .find(|e| e.kind == EdgeKind::Wired)
                    .map(|e| e.link())
                    .ok_or_else(|| mismatch(format!("frontend {v} has no wired parent")))?
            } else {
                *parent.get(&v).ok_or_else(|| mismatch(format!("node {v} on the route of {dest} has no parent")))?
            };
            route.push(up);
            v = up.src;
        }
        route.reverse();
        Ok(route)
    };

    let mut chosen: BTreeSet<Link> = BTreeSet::new();
    let mut flows = Vec::new();
    let mut ue_rates = Vec::new();
    for k in &built.commodities {
        let route = route_of(k.dest)?;
        let rate = match built.problem {
            ProblemKind::Throughput => {
                let inflow: f64 = graph
                    .in_edges(k.dest)
                    .iter()
                    .filter_map(|&ei| ir.var(&super::ir::VarKey::Flow { commodity: k.id, link: graph.edges()[ei].link() }))
                    .map(|v| x[v.0].max(0.0))
                    .sum();
                inflow
            }
            ProblemKind::Energy => k.demand_mbps,
        };
        let value = match built.problem {
            ProblemKind::Throughput => rate,
            ProblemKind::Energy => 1.0,
        };
        flows.push(CommodityFlow {
            commodity: k.id,
            dest: k.dest,
            links: route.iter().map(|l| LinkValue { src: l.src, dst: l.dst, value }).collect(),
        });
        ue_rates.push(UeRate { ue: k.dest, rate_mbps: rate });
        chosen.extend(route);
    }

    // airtime and capacity claims on chosen wireless links
    let mut airtime = Vec::new();
    let mut capacities = Vec::new();
    for lv in &built.links {
        let l = lv.link();
        if !chosen.contains(&l) {
            continue;
        }
        airtime.push(LinkValue { src: l.src, dst: l.dst, value: x[lv.alpha.0].clamp(0.0, 1.0) });
        let mut level = None;
        for (i, feas) in lv.plan.levels.iter().enumerate() {
            let on = match feas {
                LevelFeasibility::Always => true,
                LevelFeasibility::Never => false,
                LevelFeasibility::Variable => lv.phi[i].is_some_and(|p| x[p.0] == 1.0),
            };
            if on {
                level = Some(i);
            }
        }
        // φ cross-check against the SINR at the extracted powers
        let b = instance.gains.budget(l, &powers);
        let direct = instance.table.capacity_from_sinr(b.signal_mw * (1.0 + SINR_REL_TOL), b.interference_mw).level;
        if level > direct {
            return Err(mismatch(format!("link {l}: model grants step {level:?}, SINR supports {direct:?}")));
        }
        let strict = instance.table.capacity_from_sinr(b.signal_mw * (1.0 - SINR_REL_TOL), b.interference_mw).level;
        if level < strict {
            return Err(mismatch(format!("link {l}: model withholds step {strict:?} although SINR supports it")));
        }
        capacities.push(LinkCapacity {
            src: l.src,
            dst: l.dst,
            level,
            capacity_mbps: instance.table.capacity_of(level),
            throughput_mbps: x[lv.cap.0].max(0.0),
        });
    }

    let frontends: Vec<FrontendState> = built
        .powers
        .keys()
        .map(|&f| {
            let p = powers[&f];
            let active = match built.active.get(&f) {
                Some(a) => a.eval(&x) > 0.5,
                None => p > 0.0,
            };
            FrontendState { id: f, unit_id: instance.unit_of(f), p_tx_mw: p, active }
        })
        .collect();

    let mut sol = NetworkSolution {
        problem: built.problem,
        status,
        objective: 0.0,
        chosen_edges: chosen.into_iter().collect(),
        flows,
        airtime,
        capacities,
        frontends,
        ue_rates,
        p_total_w: None,
    };
    let report = total_power(&sol, &instance.power_model).map_err(|e| mismatch(e.to_string()))?;
    sol.p_total_w = Some(report.total_w);
    let raw_obj = raw.objective.ok_or_else(|| mismatch("missing objective"))?;
    sol.objective = match built.problem {
        ProblemKind::Throughput => {
            let min_rate = sol.min_ue_rate().unwrap_or(0.0);
            if min_rate < raw_obj * (1.0 - OBJECTIVE_REL_TOL) - 1e-9 {
                return Err(mismatch(format!("minimum UE rate {min_rate} below model objective {raw_obj}")));
            }
            min_rate
        }
        ProblemKind::Energy => {
            if (report.total_w - raw_obj).abs() > OBJECTIVE_REL_TOL * raw_obj.abs().max(1.0) {
                return Err(mismatch(format!("recomputed power {} differs from model objective {raw_obj}", report.total_w)));
            }
            report.total_w
        }
    };

    let v = validate_solution(instance, &sol);
    if !v.ok {
        return Err(mismatch(format!("validation failed: {:?}", v.violations)));
    }
    Ok(sol)
}
