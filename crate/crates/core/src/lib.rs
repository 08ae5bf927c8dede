//! Joint routing, scheduling and power control for integrated access and
//! backhaul networks.
//!
//! A [`graph::MeasurementGraph`] of candidate links feeds a
//! [`instance::ProblemInstance`], which is solved exactly through
//! [`milp`] or approximately through [`heuristics`]. [`oracle`] provides
//! brute-force optima and solution validation for small instances.

pub mod capacity;
pub mod channel;
pub mod energy;
pub mod graph;
pub mod heuristics;
pub mod instance;
pub mod milp;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod solution;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/capacity.md")]
    mod capacity {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/heuristics.md")]
    mod heuristics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
