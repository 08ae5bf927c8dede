//! Builders for the max-min throughput and minimum-energy formulations.

use std::collections::BTreeMap;

use crate::graph::{Commodity, EdgeKind, Link, NodeId, NodeKind};
use crate::instance::{PowerDomain, ProblemInstance};
use crate::solution::ProblemKind;

use super::bigm::{plan_link, LevelFeasibility, LinkPlan};
use super::ir::{Cmp, LinearExpr, ModelIR, ObjSense, VarId, VarKey};
use super::linearize::{linearize_binary_product, linearize_indicator, Implication};
use super::MilpError;

/// Lower bound on normalized power of a frontend that is switched on in
/// continuous mode; keeps "on" from meaning "on at zero watts".
pub const CONTINUOUS_ON_FRACTION: f64 = 1e-3;

/// Interferer coefficients above this are clipped; exact whenever the
/// interferer's power is chosen from a discrete set.
const COEFF_CLIP: f64 = 2.0;

/// How a frontend's transmit power appears in the model.
#[derive(Debug, Clone)]
pub enum PowerRepr {
    Const(f64),
    /// (λ variable, level in mW)
    Levels(Vec<(VarId, f64)>),
    /// Normalized power x = P/max and its on/off indicator.
    Continuous { x: VarId, on: VarId, max_mw: f64 },
}

impl PowerRepr {
    pub fn power_mw(&self) -> LinearExpr {
        match self {
            PowerRepr::Const(p) => LinearExpr::constant(*p),
            PowerRepr::Levels(vars) => vars.iter().fold(LinearExpr::new(), |e, &(v, p)| e.with(v, p)),
            PowerRepr::Continuous { x, max_mw, .. } => LinearExpr::term(*x, *max_mw),
        }
    }

    pub fn on(&self) -> LinearExpr {
        match self {
            PowerRepr::Const(p) => LinearExpr::constant(if *p > 0.0 { 1.0 } else { 0.0 }),
            PowerRepr::Levels(vars) => vars.iter().fold(LinearExpr::new(), |e, &(v, _)| e.with(v, 1.0)),
            PowerRepr::Continuous { on, .. } => LinearExpr::var(*on),
        }
    }

    fn always_on(&self) -> bool {
        matches!(self, PowerRepr::Const(p) if *p > 0.0)
    }

    /// Interference expression th·g·P/S_max with clipped coefficients,
    /// plus its smallest and largest value.
    fn scaled_interference(&self, scale: f64) -> (LinearExpr, f64, f64) {
        match self {
            PowerRepr::Const(p) => {
                let c = scale * p;
                (LinearExpr::constant(c), c, c)
            }
            PowerRepr::Levels(vars) => {
                let mut e = LinearExpr::new();
                let mut hi = 0.0f64;
                for &(v, p) in vars {
                    let c = (scale * p).min(COEFF_CLIP);
                    e.add(v, c);
                    hi = hi.max(c);
                }
                (e, 0.0, hi)
            }
            PowerRepr::Continuous { x, max_mw, .. } => {
                let c = scale * max_mw;
                (LinearExpr::term(*x, c), 0.0, c)
            }
        }
    }
}

/// Variables attached to one usable wireless link.
#[derive(Debug, Clone)]
pub struct LinkVars {
    pub plan: LinkPlan,
    pub use_var: VarId,
    pub alpha: VarId,
    pub cap: VarId,
    /// φ_i per ladder step; `None` when the step is constant (see `plan`).
    pub phi: Vec<Option<VarId>>,
}

impl LinkVars {
    pub fn link(&self) -> Link {
        self.plan.link
    }
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub ir: ModelIR,
    pub problem: ProblemKind,
    pub domains: BTreeMap<NodeId, PowerDomain>,
    pub powers: BTreeMap<NodeId, PowerRepr>,
    /// a(v) per frontend (energy problem only).
    pub active: BTreeMap<NodeId, LinearExpr>,
    pub links: Vec<LinkVars>,
    /// Commodities carried by the model.
    pub commodities: Vec<Commodity>,
    pub z: Option<VarId>,
    /// Objective constant not representable in the backend.
    pub objective_offset: f64,
}

impl BuiltModel {
    pub fn link_vars(&self, link: Link) -> Option<&LinkVars> {
        self.links.iter().find(|l| l.link() == link)
    }
}

pub fn build_throughput_model(instance: &ProblemInstance) -> Result<BuiltModel, MilpError> {
    let domains = instance.power_domains(ProblemKind::Throughput)?;
    build_model(instance, ProblemKind::Throughput, &domains, None)
}

pub fn build_energy_model(instance: &ProblemInstance) -> Result<BuiltModel, MilpError> {
    let domains = instance.power_domains(ProblemKind::Energy)?;
    build_model(instance, ProblemKind::Energy, &domains, None)
}

/// Builds either formulation for explicit per-frontend power domains.
pub fn build_model(
    instance: &ProblemInstance,
    problem: ProblemKind,
    domains: &BTreeMap<NodeId, PowerDomain>,
    big_m_cap: Option<f64>,
) -> Result<BuiltModel, MilpError> {
    let graph = &instance.graph;
    let table = &instance.table;
    let pm = &instance.power_model;
    let c_top = table.top_capacity();
    let mut m = ModelIR::new();

    if problem == ProblemKind::Throughput && instance.commodities.is_empty() {
        return Err(MilpError::EmptyCommodities);
    }

    // power representation per frontend
    let mut powers = BTreeMap::new();
    for f in graph.frontend_ids() {
        let d = domains.get(&f).cloned().unwrap_or(PowerDomain::Const(0.0));
        let repr = match d {
            PowerDomain::Const(p) => PowerRepr::Const(p),
            PowerDomain::Levels { levels_mw, allow_off } => {
                let vars: Vec<(VarId, f64)> = levels_mw
                    .iter()
                    .enumerate()
                    .map(|(l, &p)| (m.binary(VarKey::PowerLevel { frontend: f, level: l }), p))
                    .collect();
                if problem == ProblemKind::Throughput {
                    let sum = vars.iter().fold(LinearExpr::new(), |e, &(v, _)| e.with(v, 1.0));
                    m.add_constraint(format!("one_level_{f}"), sum, if allow_off { Cmp::Le } else { Cmp::Eq }, 1.0);
                }
                PowerRepr::Levels(vars)
            }
            PowerDomain::Continuous { max_mw } => {
                if problem == ProblemKind::Energy {
                    return Err(MilpError::UnsupportedMode);
                }
                let x = m.continuous(VarKey::Power(f), 0.0, 1.0);
                let on = m.binary(VarKey::PowerOn(f));
                m.add_constraint(format!("on_ub_{f}"), LinearExpr::var(x).with(on, -1.0), Cmp::Le, 0.0);
                m.add_constraint(format!("on_lb_{f}"), LinearExpr::var(x).with(on, -CONTINUOUS_ON_FRACTION), Cmp::Ge, 0.0);
                PowerRepr::Continuous { x, on, max_mw }
            }
        };
        powers.insert(f, repr);
    }

    // activation a(v)
    let mut active = BTreeMap::new();
    if problem == ProblemKind::Energy {
        for (&f, repr) in &powers {
            let a = match repr {
                PowerRepr::Const(p) => LinearExpr::constant(if *p > 0.0 { 1.0 } else { 0.0 }),
                PowerRepr::Levels(_) => {
                    let allow_off = matches!(domains.get(&f), Some(PowerDomain::Levels { allow_off: true, .. }));
                    let a = m.add_var(VarKey::Active(f), super::ir::VarKind::Binary, if allow_off { 0.0 } else { 1.0 }, 1.0);
                    m.add_constraint(format!("levels_active_{f}"), repr.on().with(a, -1.0), Cmp::Eq, 0.0);
                    LinearExpr::var(a)
                }
                PowerRepr::Continuous { .. } => unreachable!("rejected above"),
            };
            active.insert(f, a);
        }
    }

    // wireless links
    let mut links = Vec::new();
    for (_, e) in graph.wireless_edges() {
        let link = e.link();
        let plan = plan_link(link, instance, domains);
        if !plan.usable() {
            continue;
        }
        let use_var = m.binary(VarKey::EdgeUse(link));
        let alpha = m.continuous(VarKey::Airtime(link), 0.0, 1.0);
        let cap = m.continuous(VarKey::Capacity(link), 0.0, c_top);
        m.add_constraint(format!("alpha_use_{link}"), LinearExpr::var(alpha).with(use_var, -1.0), Cmp::Le, 0.0);
        if let Some(a) = active.get(&link.src) {
            m.add_constraint(format!("use_active_{link}"), LinearExpr::var(use_var).plus(a, -1.0), Cmp::Le, 0.0);
        }

        let src = &powers[&link.src];
        let s_norm = src.power_mw().normalized();
        let g_s = instance.gains.serving_gain(link);
        let s_norm = LinearExpr { terms: s_norm.terms.iter().map(|&(v, c)| (v, c * g_s / plan.s_max)).collect(), constant: s_norm.constant * g_s / plan.s_max };

        let mut phi: Vec<Option<VarId>> = Vec::with_capacity(plan.levels.len());
        for (i, feas) in plan.levels.iter().enumerate() {
            if *feas != LevelFeasibility::Variable {
                phi.push(None);
                continue;
            }
            let th = table.threshold_lin(i);
            let p = m.binary(VarKey::Threshold { link, level: i });
            let noise_term = th * instance.gains.noise_mw / plan.s_max;
            let mut expr = s_norm.clone().plus(&LinearExpr::constant(-noise_term), 1.0);
            let (mut lo, mut hi) = (noise_term, noise_term);
            for (r, g) in instance.gains.interferers_of(link) {
                let Some(repr) = powers.get(&r) else { continue };
                let (ie, ilo, ihi) = repr.scaled_interference(th * g / plan.s_max);
                expr = expr.plus(&ie, -1.0);
                lo += ilo;
                hi += ihi;
            }
            let mut m_low = hi;
            if let Some(cap) = big_m_cap {
                m_low = m_low.min(cap / plan.s_max);
            }
            if m_low > 0.0 {
                m.push(named(linearize_indicator(&expr, p, Implication::OnImpliesNonNegative, m_low)?, format!("thr_on_{link}_{i}")));
            }
            let m_up = 1.0 - lo;
            if m_up > 0.0 {
                m.push(named(linearize_indicator(&expr, p, Implication::OffImpliesNonPositive, m_up)?, format!("thr_off_{link}_{i}")));
            }
            if !src.always_on() {
                m.add_constraint(format!("thr_src_on_{link}_{i}"), LinearExpr::var(p).plus(&src.on(), -1.0), Cmp::Le, 0.0);
            }
            if let Some(Some(prev)) = phi.last() {
                m.add_constraint(format!("thr_chain_{link}_{i}"), LinearExpr::var(p).with(*prev, -1.0), Cmp::Le, 0.0);
            }
            phi.push(Some(p));
        }

        // c ≤ α·(C_0·φ_0 + Σ (C_i − C_{i−1})·φ_i)
        let mut rhs = LinearExpr::new();
        let mut always_gain = 0.0;
        for (i, feas) in plan.levels.iter().enumerate() {
            let delta = table.capacity(i) - if i == 0 { 0.0 } else { table.capacity(i - 1) };
            if delta == 0.0 {
                continue;
            }
            match (feas, phi[i]) {
                (LevelFeasibility::Always, _) => always_gain += delta,
                (LevelFeasibility::Variable, Some(p)) => {
                    let (y, cons) = linearize_binary_product(&mut m, VarKey::Aux(format!("phi_alpha_{}_{}_{i}", link.src, link.dst)), p, &LinearExpr::var(alpha), 1.0)?;
                    for c in cons {
                        m.push(c);
                    }
                    rhs.add(y, delta);
                }
                _ => {}
            }
        }
        rhs.add(alpha, always_gain);
        m.add_constraint(format!("cap_couple_{link}"), LinearExpr::var(cap).plus(&rhs, -1.0), Cmp::Le, 0.0);

        links.push(LinkVars { plan, use_var, alpha, cap, phi });
    }

    // tree: at most one chosen incoming wireless link per node
    let mut incoming: BTreeMap<NodeId, Vec<&LinkVars>> = BTreeMap::new();
    let mut incident: BTreeMap<NodeId, Vec<VarId>> = BTreeMap::new();
    for lv in &links {
        incoming.entry(lv.link().dst).or_default().push(lv);
        incident.entry(lv.link().dst).or_default().push(lv.alpha);
        incident.entry(lv.link().src).or_default().push(lv.alpha);
    }
    for (v, ins) in &incoming {
        if ins.len() > 1 {
            let e = ins.iter().fold(LinearExpr::new(), |e, lv| e.with(lv.use_var, 1.0));
            m.add_constraint(format!("indeg_{v}"), e, Cmp::Le, 1.0);
        }
    }
    // airtime budget per node
    for (v, alphas) in &incident {
        if alphas.len() > 1 {
            let e = alphas.iter().fold(LinearExpr::new(), |e, &a| e.with(a, 1.0));
            m.add_constraint(format!("budget_{v}"), e, Cmp::Le, 1.0);
        }
    }

    let link_pos: BTreeMap<Link, usize> = links.iter().enumerate().map(|(i, l)| (l.link(), i)).collect();
    let mut objective_offset = 0.0;
    let (commodities, z) = match problem {
        ProblemKind::Throughput => {
            let z = m.continuous(VarKey::Z, instance.min_rate_mbps, c_top.max(instance.min_rate_mbps));
            add_flows(&mut m, instance, &links, &link_pos, &instance.commodities, FlowKind::Rate(z), c_top);
            m.set_objective(ObjSense::Maximize, LinearExpr::var(z));
            (instance.commodities.clone(), Some(z))
        }
        ProblemKind::Energy => {
            let routed: Vec<Commodity> = instance.commodities.iter().filter(|c| c.demand_mbps > 0.0).cloned().collect();
            add_flows(&mut m, instance, &links, &link_pos, &routed, FlowKind::Route, c_top);

            let n = f64::from(pm.n_trx);
            let mut obj = LinearExpr::new();
            let mut by_src: BTreeMap<NodeId, Vec<VarId>> = BTreeMap::new();
            for lv in &links {
                by_src.entry(lv.link().src).or_default().push(lv.alpha);
            }
            let mut unit_members: BTreeMap<u32, Vec<NodeId>> = BTreeMap::new();
            for (&f, repr) in &powers {
                objective_offset += n * pm.p_sleep_w;
                let a = &active[&f];
                obj = obj.plus(a, n * (pm.p0_w - pm.p_sleep_w));
                unit_members.entry(instance.unit_of(f)).or_default().push(f);
                let (Some(outs), PowerRepr::Levels(vars)) = (by_src.get(&f), repr) else { continue };
                let tx = m.continuous(VarKey::TxAirtime(f), 0.0, 1.0);
                let sum = outs.iter().fold(LinearExpr::new(), |e, &a| e.with(a, 1.0));
                m.add_constraint(format!("txair_{f}"), LinearExpr::var(tx).plus(&sum, -1.0), Cmp::Eq, 0.0);
                for (l, &(lam, p_mw)) in vars.iter().enumerate() {
                    let slope = pm.delta_p * p_mw / 1000.0;
                    if slope == 0.0 {
                        continue;
                    }
                    let (w, cons) = linearize_binary_product(&mut m, VarKey::Aux(format!("lambda_air_{f}_{l}")), lam, &LinearExpr::var(tx), 1.0)?;
                    for c in cons {
                        m.push(c);
                    }
                    obj.add(w, slope);
                }
            }
            if pm.unit_adder_w > 0.0 {
                for (unit, members) in unit_members {
                    let u = m.binary(VarKey::UnitActive(unit));
                    for f in members {
                        m.add_constraint(format!("unit_{unit}_{f}"), LinearExpr::var(u).plus(&active[&f], -1.0), Cmp::Ge, 0.0);
                    }
                    obj.add(u, pm.unit_adder_w);
                }
            }
            obj.add_constant(objective_offset);
            m.set_objective(ObjSense::Minimize, obj);
            (routed, None)
        }
    };

    m.check().map_err(MilpError::Build)?;
    Ok(BuiltModel { ir: m, problem, domains: domains.clone(), powers, active, links, commodities, z, objective_offset })
}

enum FlowKind {
    /// Continuous Mbps flows, destination inflow ≥ Z.
    Rate(VarId),
    /// Binary unit routing weighted by demand.
    Route,
}

fn add_flows(
    m: &mut ModelIR,
    instance: &ProblemInstance,
    links: &[LinkVars],
    link_pos: &BTreeMap<Link, usize>,
    commodities: &[Commodity],
    kind: FlowKind,
    c_top: f64,
) {
    let graph = &instance.graph;
    let mut load: Vec<LinearExpr> = vec![LinearExpr::new(); links.len()];
    for k in commodities {
        // edges usable by commodity k: wired edges plus usable wireless links
        // that do not end at another UE
        let mut edges: Vec<Link> = Vec::new();
        for e in graph.edges() {
            let l = e.link();
            let ok = match e.kind {
                EdgeKind::Wired => true,
                EdgeKind::Wireless => link_pos.contains_key(&l) && (e.dst == k.dest || graph.node(e.dst).map(|n| n.kind) != Some(NodeKind::Ue)),
            };
            if ok {
                edges.push(l);
            }
        }
        let mut balance: BTreeMap<NodeId, LinearExpr> = BTreeMap::new();
        for l in edges {
            let key = VarKey::Flow { commodity: k.id, link: l };
            let v = match kind {
                FlowKind::Rate(_) => m.continuous(key, 0.0, c_top),
                FlowKind::Route => m.binary(key),
            };
            balance.entry(l.dst).or_default().add(v, 1.0);
            balance.entry(l.src).or_default().add(v, -1.0);
            if let Some(&pos) = link_pos.get(&l) {
                match kind {
                    FlowKind::Rate(_) => {
                        load[pos].add(v, 1.0);
                    }
                    FlowKind::Route => {
                        load[pos].add(v, k.demand_mbps);
                        m.add_constraint(format!("route_use_k{}_{l}", k.id), LinearExpr::var(v).with(links[pos].use_var, -1.0), Cmp::Le, 0.0);
                    }
                }
            }
        }
        // balance = inflow − outflow
        for (v, e) in balance {
            if v == k.source {
                if let FlowKind::Route = kind {
                    m.add_constraint(format!("src_k{}", k.id), e, Cmp::Eq, -1.0);
                }
            } else if v == k.dest {
                match kind {
                    FlowKind::Rate(z) => m.add_constraint(format!("sink_k{}", k.id), e.with(z, -1.0), Cmp::Ge, 0.0),
                    FlowKind::Route => m.add_constraint(format!("sink_k{}", k.id), e, Cmp::Eq, 1.0),
                }
            } else {
                m.add_constraint(format!("cons_k{}_{v}", k.id), e, Cmp::Eq, 0.0);
            }
        }
        if !graph.in_edges(k.dest).iter().any(|&ei| link_pos.contains_key(&graph.edges()[ei].link())) {
            // no usable parent: record the infeasibility explicitly
            match kind {
                FlowKind::Rate(z) => m.add_constraint(format!("sink_k{}", k.id), LinearExpr::term(z, -1.0), Cmp::Ge, 0.0),
                FlowKind::Route => m.add_constraint(format!("sink_k{}", k.id), LinearExpr::new(), Cmp::Eq, 1.0),
            }
        }
    }
    for (pos, e) in load.into_iter().enumerate() {
        if !e.terms.is_empty() {
            m.add_constraint(format!("cap_{}", links[pos].link()), e.with(links[pos].cap, -1.0), Cmp::Le, 0.0);
        }
    }
}

fn named(mut c: super::ir::Constraint, name: String) -> super::ir::Constraint {
    c.name = name;
    c
}
