//! Mixed-integer formulations of the max-min throughput and minimum-energy
//! problems, an explicit linearization layer, and a pluggable backend.

pub mod backend;
pub mod bigm;
pub mod extract;
pub mod ir;
pub mod linearize;
pub mod model;

use std::collections::BTreeMap;
use std::time::Instant;

use thiserror::Error;

use crate::graph::NodeId;
use crate::instance::{InstanceError, PowerDomain, ProblemInstance};
use crate::solution::{NetworkSolution, ProblemKind};

pub use backend::{BackendError, HighsBackend, MilpBackend, RawSolution, SolveStatus, SolverOptions};
pub use bigm::{compute_big_m, BigM};
pub use extract::extract_solution;
pub use ir::{Cmp, Constraint, LinearExpr, ModelIR, ObjSense, VarId, VarKey, VarKind};
pub use linearize::{linearize_binary_product, linearize_indicator, Implication, LinearizeError};
pub use model::{build_energy_model, build_model, build_throughput_model, BuiltModel};

#[derive(Debug, Error, PartialEq)]
pub enum MilpError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("continuous power cannot be used in the energy problem")]
    UnsupportedMode,
    #[error("instance has no commodities")]
    EmptyCommodities,
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
    #[error("model construction: {0}")]
    Build(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("extraction mismatch: {0}")]
    ExtractionMismatch(String),
}

pub fn solve(model: &ModelIR, options: &SolverOptions, backend: &dyn MilpBackend) -> Result<RawSolution, MilpError> {
    Ok(backend.solve(model, options)?)
}

/// Result of one build–solve–extract round.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub solution: Option<NetworkSolution>,
    pub runtime_s: f64,
}

impl SolveOutcome {
    pub fn objective(&self) -> Option<f64> {
        self.solution.as_ref().map(|s| s.objective)
    }
}

/// Builds, solves and extracts one problem with the instance's power mode.
pub fn solve_problem(instance: &ProblemInstance, problem: ProblemKind, options: &SolverOptions, backend: &dyn MilpBackend) -> Result<SolveOutcome, MilpError> {
    let domains = instance.power_domains(problem)?;
    solve_with_domains(instance, problem, &domains, options, backend)
}

/// Same as [`solve_problem`] with explicit per-frontend power domains.
pub fn solve_with_domains(
    instance: &ProblemInstance,
    problem: ProblemKind,
    domains: &BTreeMap<NodeId, PowerDomain>,
    options: &SolverOptions,
    backend: &dyn MilpBackend,
) -> Result<SolveOutcome, MilpError> {
    let start = Instant::now();
    let built = build_model(instance, problem, domains, options.big_m_cap)?;
    let raw = solve(&built.ir, options, backend)?;
    let solution = if raw.has_solution() { Some(extract_solution(&built, &raw, instance)?) } else { None };
    Ok(SolveOutcome { status: raw.status, solution, runtime_s: start.elapsed().as_secs_f64() })
}
