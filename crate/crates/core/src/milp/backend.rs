//! Pluggable MILP backends. HiGHS is the shipped implementation.

use std::num::NonZeroU32;

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ir::{Cmp, ModelIR, ObjSense, VarKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub time_limit_s: f64,
    pub rel_gap: f64,
    pub big_m_cap: Option<f64>,
    pub seed: u32,
    pub threads: u32,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { time_limit_s: 60.0, rel_gap: 1e-9, big_m_cap: None, seed: 0, threads: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Feasible { gap: f64 },
    Infeasible,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    /// Objective including any constant term.
    pub objective: Option<f64>,
    /// One value per model variable, when a solution exists.
    pub values: Option<Vec<f64>>,
}

impl RawSolution {
    pub fn has_solution(&self) -> bool {
        self.values.is_some()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BackendError {
    #[error("invalid solver options: {0}")]
    BadOptions(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

pub trait MilpBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &ModelIR, options: &SolverOptions) -> Result<RawSolution, BackendError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

impl MilpBackend for HighsBackend {
    fn name(&self) -> &'static str {
        "highs"
    }

    fn solve(&self, model: &ModelIR, options: &SolverOptions) -> Result<RawSolution, BackendError> {
        if !(options.time_limit_s > 0.0) {
            return Err(BackendError::BadOptions("time_limit_s must be positive".into()));
        }
        let mut pb = RowProblem::default();
        let obj_terms: std::collections::HashMap<usize, f64> = model.objective.expr.terms.iter().map(|&(v, c)| (v.0, c)).collect();
        let cols: Vec<_> = model
            .variables()
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let cost = obj_terms.get(&i).copied().unwrap_or(0.0);
                match v.kind {
                    VarKind::Binary => pb.add_integer_column(cost, v.lb..=v.ub),
                    VarKind::Continuous => pb.add_column(cost, v.lb..=v.ub),
                }
            })
            .collect();
        for c in model.constraints() {
            let factors: Vec<_> = c.expr.terms.iter().map(|&(v, k)| (cols[v.0], k)).collect();
            match c.cmp {
                Cmp::Le => pb.add_row(..=c.rhs, &factors),
                Cmp::Ge => pb.add_row(c.rhs.., &factors),
                Cmp::Eq => pb.add_row(c.rhs..=c.rhs, &factors),
            }
        }
        let sense = match model.objective.sense {
            ObjSense::Minimize => Sense::Minimise,
            ObjSense::Maximize => Sense::Maximise,
        };
        let constant = model.objective.expr.constant;
        let mut hm = pb.optimise(sense);
        hm.make_quiet();
        hm.set_threads(NonZeroU32::new(options.threads.max(1)).expect("non-zero"));
        hm.set_option("time_limit", options.time_limit_s);
        hm.set_option("mip_rel_gap", options.rel_gap);
        hm.set_option("mip_abs_gap", 1e-9);
        hm.set_option("random_seed", options.seed as i32);
        let solved = hm.try_solve().map_err(|e| BackendError::Solver(format!("{e:?}")))?;
        let has_primal = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let values = has_primal.then(|| solved.get_solution().columns().to_vec());
        let objective = has_primal.then(|| solved.objective_value() + constant);
        let status = match solved.status() {
            HighsModelStatus::Optimal => SolveStatus::Optimal,
            HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => SolveStatus::Infeasible,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit
            | HighsModelStatus::ReachedInterrupt => {
                if has_primal {
                    SolveStatus::Feasible { gap: solved.mip_gap() }
                } else {
                    SolveStatus::TimeLimit
                }
            }
            HighsModelStatus::ModelEmpty => SolveStatus::Optimal,
            other => return Err(BackendError::Solver(format!("unexpected model status {other:?}"))),
        };
        if status == SolveStatus::Infeasible {
            return Ok(RawSolution { status, objective: None, values: None });
        }
        if status == SolveStatus::Optimal && values.is_none() {
            // an empty model has the trivial solution
            if model.num_vars() == 0 {
                return Ok(RawSolution { status, objective: Some(constant), values: Some(Vec::new()) });
            }
            return Err(BackendError::Solver("optimal status without a primal solution".into()));
        }
        Ok(RawSolution { status, objective, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::ir::{LinearExpr, VarKey};

    #[test]
    fn tiny_models() {
        let mut m = ModelIR::new();
        let z = m.continuous(VarKey::Z, 0.0, 100.0);
        let b = m.binary(VarKey::Aux("b".into()));
        m.add_constraint("cap", LinearExpr::var(z).with(b, -5.0), Cmp::Le, 0.0);
        m.set_objective(ObjSense::Maximize, LinearExpr::var(z).plus(&LinearExpr::constant(1.0), 1.0));
        let r = HighsBackend.solve(&m, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective.unwrap() - 6.0).abs() < 1e-9);

        m.add_constraint("need", LinearExpr::var(z), Cmp::Ge, 10.0);
        let r = HighsBackend.solve(&m, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.values.is_none());
    }

    #[test]
    fn rejects_bad_time_limit() {
        let m = ModelIR::new();
        let o = SolverOptions { time_limit_s: 0.0, ..Default::default() };
        assert!(matches!(HighsBackend.solve(&m, &o), Err(BackendError::BadOptions(_))));
    }
}
