//! Solver-agnostic model: typed variables with a key registry, linear
//! constraints and a linear objective.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use crate::graph::{Link, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// Semantic name of a model variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    /// f_k(u,v)
    Flow { commodity: u32, link: Link },
    /// f(u,v), link selected
    EdgeUse(Link),
    /// α(u,v)
    Airtime(Link),
    /// c(u,v)
    Capacity(Link),
    /// Normalized continuous power P/P_max of a frontend.
    Power(NodeId),
    /// λ_{u,l}: frontend transmits at its l-th positive level.
    PowerLevel { frontend: NodeId, level: usize },
    /// Frontend transmits at all (continuous power mode).
    PowerOn(NodeId),
    /// φ_i(u,v)
    Threshold { link: Link, level: usize },
    /// a(v)
    Active(NodeId),
    /// Unit with at least one active frontend.
    UnitActive(u32),
    /// Sum of a frontend's outgoing airtime.
    TxAirtime(NodeId),
    Z,
    Aux(String),
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarKey::Flow { commodity, link } => write!(f, "f_k{commodity}_{}_{}", link.src, link.dst),
            VarKey::EdgeUse(l) => write!(f, "use_{}_{}", l.src, l.dst),
            VarKey::Airtime(l) => write!(f, "alpha_{}_{}", l.src, l.dst),
            VarKey::Capacity(l) => write!(f, "c_{}_{}", l.src, l.dst),
            VarKey::Power(u) => write!(f, "p_{u}"),
            VarKey::PowerLevel { frontend, level } => write!(f, "lambda_{frontend}_{level}"),
            VarKey::PowerOn(u) => write!(f, "on_{u}"),
            VarKey::Threshold { link, level } => write!(f, "phi_{}_{}_{level}", link.src, link.dst),
            VarKey::Active(v) => write!(f, "a_{v}"),
            VarKey::UnitActive(u) => write!(f, "unit_{u}"),
            VarKey::TxAirtime(u) => write!(f, "txair_{u}"),
            VarKey::Z => write!(f, "Z"),
            VarKey::Aux(name) => write!(f, "aux_{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub key: VarKey,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(v: VarId) -> Self {
        Self { terms: vec![(v, 1.0)], constant: 0.0 }
    }

    pub fn term(v: VarId, coeff: f64) -> Self {
        Self { terms: vec![(v, coeff)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn add(&mut self, v: VarId, coeff: f64) -> &mut Self {
        self.terms.push((v, coeff));
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn with(mut self, v: VarId, coeff: f64) -> Self {
        self.terms.push((v, coeff));
        self
    }

    pub fn plus(mut self, other: &LinearExpr, scale: f64) -> Self {
        self.terms.extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    /// Merges duplicate variables and drops zero coefficients.
    pub fn normalized(&self) -> Self {
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *merged.entry(v).or_default() += c;
        }
        Self { terms: merged.into_iter().filter(|(_, c)| *c != 0.0).collect(), constant: self.constant }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * values[v.0]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Eq,
    Ge,
}

/// `expr cmp rhs`; any constant inside `expr` is moved to the rhs on insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: LinearExpr,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(name: impl Into<String>, expr: LinearExpr, cmp: Cmp, rhs: f64) -> Self {
        Self { name: name.into(), expr, cmp, rhs }
    }

    /// Signed violation at a point (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.expr.eval(values);
        match self.cmp {
            Cmp::Le => (lhs - self.rhs).max(0.0),
            Cmp::Ge => (self.rhs - lhs).max(0.0),
            Cmp::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub sense: ObjSense,
    pub expr: LinearExpr,
}

#[derive(Debug, Clone)]
pub struct ModelIR {
    vars: Vec<Variable>,
    registry: HashMap<VarKey, VarId>,
    constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl Default for ModelIR {
    fn default() -> Self {
        Self::new()
    }
}

impl ModelIR {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            registry: HashMap::new(),
            constraints: Vec::new(),
            objective: Objective { sense: ObjSense::Minimize, expr: LinearExpr::new() },
        }
    }

    /// Declares a variable. Keys are unique; redeclaring one panics since it
    /// is always a builder bug.
    pub fn add_var(&mut self, key: VarKey, kind: VarKind, lb: f64, ub: f64) -> VarId {
        let (lb, ub) = match kind {
            VarKind::Binary => (lb.max(0.0), ub.min(1.0)),
            VarKind::Continuous => (lb, ub),
        };
        let id = VarId(self.vars.len());
        let prev = self.registry.insert(key.clone(), id);
        assert!(prev.is_none(), "variable {key} declared twice");
        self.vars.push(Variable { key, kind, lb, ub });
        id
    }

    pub fn binary(&mut self, key: VarKey) -> VarId {
        self.add_var(key, VarKind::Binary, 0.0, 1.0)
    }

    pub fn continuous(&mut self, key: VarKey, lb: f64, ub: f64) -> VarId {
        self.add_var(key, VarKind::Continuous, lb, ub)
    }

    pub fn var(&self, key: &VarKey) -> Option<VarId> {
        self.registry.get(key).copied()
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, expr: LinearExpr, cmp: Cmp, rhs: f64) {
        let expr = expr.normalized();
        let rhs = rhs - expr.constant;
        let expr = LinearExpr { constant: 0.0, ..expr };
        self.constraints.push(Constraint::new(name, expr, cmp, rhs));
    }

    pub fn push(&mut self, c: Constraint) {
        let Constraint { name, expr, cmp, rhs } = c;
        self.add_constraint(name, expr, cmp, rhs);
    }

    pub fn set_objective(&mut self, sense: ObjSense, expr: LinearExpr) {
        self.objective = Objective { sense, expr: expr.normalized() };
    }

    /// Every referenced variable is declared and every bound is ordered.
    pub fn check(&self) -> Result<(), String> {
        let n = self.vars.len();
        for c in &self.constraints {
            if let Some((v, _)) = c.expr.terms.iter().find(|(v, _)| v.0 >= n) {
                return Err(format!("constraint {} references undeclared variable {}", c.name, v.0));
            }
        }
        if self.objective.expr.terms.iter().any(|(v, _)| v.0 >= n) {
            return Err("objective references an undeclared variable".into());
        }
        if let Some(v) = self.vars.iter().find(|v| v.lb > v.ub) {
            return Err(format!("variable {} has empty bounds", v.key));
        }
        Ok(())
    }

    /// Largest constraint or bound violation of a point.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self.vars.iter().zip(values).map(|(v, &x)| (v.lb - x).max(x - v.ub).max(0.0));
        let rows = self.constraints.iter().map(|c| c.violation(values));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// CPLEX LP-format text of the model.
    pub fn to_lp_string(&self) -> String {
        let name = |v: VarId| self.vars[v.0].key.to_string();
        let fmt_expr = |e: &LinearExpr| {
            let mut s = String::new();
            for (i, &(v, c)) in e.terms.iter().enumerate() {
                let sign = if c < 0.0 { "-" } else if i == 0 { "" } else { "+" };
                let _ = write!(s, "{}{sign} {} {}", if i == 0 { "" } else { " " }, c.abs(), name(v));
            }
            if s.is_empty() {
                s.push_str("0");
            }
            s
        };
        let mut out = String::new();
        out.push_str(match self.objective.sense {
            ObjSense::Minimize => "Minimize\n",
            ObjSense::Maximize => "Maximize\n",
        });
        let _ = writeln!(out, " obj: {}", fmt_expr(&self.objective.expr));
        out.push_str("Subject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let op = match c.cmp {
                Cmp::Le => "<=",
                Cmp::Eq => "=",
                Cmp::Ge => ">=",
            };
            let label: String = c.name.chars().map(|ch| if ch.is_ascii_alphanumeric() || ch == '_' { ch } else { '_' }).collect();
            let _ = writeln!(out, " r{i}_{label}: {} {op} {}", fmt_expr(&c.expr), c.rhs);
        }
        out.push_str("Bounds\n");
        for v in &self.vars {
            let lb = if v.lb == f64::NEG_INFINITY { "-inf".to_string() } else { v.lb.to_string() };
            let ub = if v.ub == f64::INFINITY { "+inf".to_string() } else { v.ub.to_string() };
            let _ = writeln!(out, " {lb} <= {} <= {ub}", v.key);
        }
        let bins: Vec<String> = self.vars.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.key.to_string()).collect();
        if !bins.is_empty() {
            out.push_str("Binaries\n");
            for b in bins {
                let _ = writeln!(out, " {b}");
            }
        }
        out.push_str("End\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_move_to_rhs_and_terms_merge() {
        let mut m = ModelIR::new();
        let x = m.continuous(VarKey::Z, 0.0, 10.0);
        m.add_constraint("c", LinearExpr::var(x).with(x, 2.0).plus(&LinearExpr::constant(3.0), 1.0), Cmp::Le, 9.0);
        let c = &m.constraints()[0];
        assert_eq!(c.expr.terms, vec![(x, 3.0)]);
        assert_eq!(c.rhs, 6.0);
        assert!(m.check().is_ok());
        assert_eq!(m.max_violation(&[2.0]), 0.0);
        assert_eq!(m.max_violation(&[3.0]), 3.0);
    }

    #[test]
    fn lp_dump_names_variables() {
        let mut m = ModelIR::new();
        let l = Link::new(NodeId(3), NodeId(7));
        let a = m.continuous(VarKey::Airtime(l), 0.0, 1.0);
        let f = m.binary(VarKey::EdgeUse(l));
        m.add_constraint("couple", LinearExpr::var(a).with(f, -1.0), Cmp::Le, 0.0);
        m.set_objective(ObjSense::Maximize, LinearExpr::var(a));
        let lp = m.to_lp_string();
        assert!(lp.contains("alpha_3_7 - 1 use_3_7 <= 0"), "{lp}");
        assert!(lp.contains("Binaries\n use_3_7"));
    }

    #[test]
    #[should_panic]
    fn duplicate_key_panics() {
        let mut m = ModelIR::new();
        m.binary(VarKey::Z);
        m.binary(VarKey::Z);
    }
}
