//! Two-phase local search over transmit powers and selective-reduction
//! pruning of the measurement graph.

mod local_search;
mod selective;
mod state;

use thiserror::Error;

use crate::graph::GraphError;
use crate::milp::MilpError;

pub use local_search::{local_search_energy, local_search_throughput, phase1_certificate, LocalSearchOptions, SearchOutcome};
pub use selective::{prune_graph, rank_edges, selective_reduction, Attempt, PruneParams, SelectiveOutcome};
pub use state::{read_trace_csv, write_trace_csv, LogEntry, SearchState};

#[derive(Debug, Error, PartialEq)]
pub enum HeuristicError {
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("the all-P_max starting point is infeasible")]
    NoFeasibleStart,
    #[error("demand {demand} Mbps is not below the max-min rate {max_min} Mbps")]
    DemandExceedsMaxMin { demand: f64, max_min: f64 },
    #[error("no feasible pruned problem up to k = {k_max}")]
    NoFeasibleWithinKmax { k_max: usize },
    #[error("solver stopped without a solution at k = {k}")]
    NoSolutionWithinTime { k: usize },
    #[error("invalid parameters: {0}")]
    BadParams(String),
}
