//! Run records, the results CSV, and summaries derived from it.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristics::LogEntry;
use crate::solution::{NetworkSolution, ProblemKind};

pub const RESULTS_HEADER: [&str; 10] =
    ["hour", "method", "problem", "status", "objective", "min_ue_mbps", "activated_frontends", "p_total_w", "eta_mbps_per_w", "runtime_s"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("results contain no rows")]
    EmptyResults,
    #[error("results csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("results csv header differs from {RESULTS_HEADER:?}")]
    BadHeader,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LocalSearch,
    SelectiveReduction,
    Exact,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::LocalSearch => "local-search",
            Method::SelectiveReduction => "selective-reduction",
            Method::Exact => "exact",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "local-search" => Ok(Method::LocalSearch),
            "selective-reduction" => Ok(Method::SelectiveReduction),
            "exact" => Ok(Method::Exact),
            _ => Err(format!("unknown method {s:?}")),
        }
    }
}

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub hour: u32,
    pub method: Method,
    pub problem: ProblemKind,
    pub status: String,
    pub objective: Option<f64>,
    pub min_ue_mbps: Option<f64>,
    pub activated_frontends: Option<usize>,
    pub p_total_w: Option<f64>,
    pub eta_mbps_per_w: Option<f64>,
    pub runtime_s: Option<f64>,
}

impl RunRecord {
    pub fn from_solution(hour: u32, method: Method, sol: &NetworkSolution, runtime_s: f64) -> Self {
        let status = match sol.status {
            crate::solution::SolutionStatus::Optimal => "optimal",
            crate::solution::SolutionStatus::Feasible { .. } => "feasible",
            crate::solution::SolutionStatus::TimeLimit => "time-limit",
            crate::solution::SolutionStatus::Heuristic => "heuristic",
        };
        let min_ue = sol.min_ue_rate();
        let eta = match (min_ue, sol.p_total_w) {
            (Some(b), Some(p)) if p > 0.0 => Some(b / p),
            _ => None,
        };
        Self {
            hour,
            method,
            problem: sol.problem,
            status: status.into(),
            objective: Some(sol.objective),
            min_ue_mbps: min_ue,
            activated_frontends: Some(sol.active_count()),
            p_total_w: sol.p_total_w,
            eta_mbps_per_w: eta,
            runtime_s: Some(runtime_s),
        }
    }

    /// Row for a run that produced no solution.
    pub fn failure(hour: u32, method: Method, problem: ProblemKind, status: impl Into<String>, runtime_s: f64) -> Self {
        Self {
            hour,
            method,
            problem,
            status: status.into(),
            objective: None,
            min_ue_mbps: None,
            activated_frontends: None,
            p_total_w: None,
            eta_mbps_per_w: None,
            runtime_s: Some(runtime_s),
        }
    }

    pub fn sort_key(&self) -> (u32, Method, ProblemKind) {
        (self.hour, self.method, self.problem)
    }
}

pub fn write_results_csv<W: Write>(records: &[RunRecord], w: W) -> Result<(), ReportError> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(RESULTS_HEADER)?;
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_results_csv<R: Read>(r: R) -> Result<Vec<RunRecord>, ReportError> {
    let mut rdr = csv::Reader::from_reader(r);
    if rdr.headers()?.iter().ne(RESULTS_HEADER) {
        return Err(ReportError::BadHeader);
    }
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

/// Empirical CDF: one point per distinct value with the fraction of samples
/// at or below it. Non-finite samples are ignored.
pub fn cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = frac,
            _ => out.push((*x, frac)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationPoint {
    pub hour: u32,
    pub method: Method,
    pub problem: ProblemKind,
    pub activated_frontends: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Minimum UE rate of throughput runs.
    pub throughput_cdf: Vec<(f64, f64)>,
    /// Energy efficiency of energy runs.
    pub eta_cdf: Vec<(f64, f64)>,
    pub activations: Vec<ActivationPoint>,
}

pub fn summarize(records: &[RunRecord]) -> Result<Summary, ReportError> {
    if records.is_empty() {
        return Err(ReportError::EmptyResults);
    }
    let thr: Vec<f64> = records.iter().filter(|r| r.problem == ProblemKind::Throughput).filter_map(|r| r.min_ue_mbps).collect();
    let eta: Vec<f64> = records.iter().filter(|r| r.problem == ProblemKind::Energy).filter_map(|r| r.eta_mbps_per_w).collect();
    let mut activations: Vec<ActivationPoint> = records
        .iter()
        .filter_map(|r| {
            r.activated_frontends.map(|a| ActivationPoint { hour: r.hour, method: r.method, problem: r.problem, activated_frontends: a })
        })
        .collect();
    activations.sort_by_key(|a| (a.hour, a.method, a.problem));
    Ok(Summary { throughput_cdf: cdf(&thr), eta_cdf: cdf(&eta), activations })
}

pub fn write_cdf_csv<W: Write>(points: &[(f64, f64)], value_column: &str, w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([value_column, "cdf"])?;
    for (x, p) in points {
        wtr.write_record([x.to_string(), p.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Solution-evolution statistics of one local-search trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionStats {
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_: f64,
    /// Relative change in the improving direction, in percent.
    pub improvement_pct: f64,
    /// First timestamp whose objective lies within 1% of the final one;
    /// `None` when the search never improved.
    pub time_to_near_final_s: Option<f64>,
    pub total_time_s: f64,
}

pub const NEAR_FINAL_FRACTION: f64 = 0.01;

pub fn evolution_stats(log: &[LogEntry], maximize: bool) -> Option<EvolutionStats> {
    let first = log.first()?;
    let last = log.last()?;
    let (initial, final_) = (first.objective, last.objective);
    let change = if maximize { final_ - initial } else { initial - final_ };
    let improvement_pct = if initial != 0.0 { change / initial.abs() * 100.0 } else { 0.0 };
    let tol = NEAR_FINAL_FRACTION * final_.abs();
    let near = (change > 0.0).then(|| log.iter().find(|e| (e.objective - final_).abs() <= tol).map_or(last.timestamp_s, |e| e.timestamp_s));
    Some(EvolutionStats { initial, final_, improvement_pct, time_to_near_final_s: near, total_time_s: last.timestamp_s })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_shape() {
        assert_eq!(cdf(&[3.0]), vec![(3.0, 1.0)]);
        let c = cdf(&[2.0, 1.0, 2.0, 4.0]);
        assert_eq!(c, vec![(1.0, 0.25), (2.0, 0.75), (4.0, 1.0)]);
        assert!(cdf(&[]).is_empty());
    }

    #[test]
    fn results_round_trip() {
        let rows = vec![
            RunRecord {
                hour: 0,
                method: Method::LocalSearch,
                problem: ProblemKind::Throughput,
                status: "heuristic".into(),
                objective: Some(12.5),
                min_ue_mbps: Some(12.5),
                activated_frontends: Some(3),
                p_total_w: Some(385.14),
                eta_mbps_per_w: Some(12.5 / 385.14),
                runtime_s: None,
            },
            RunRecord::failure(1, Method::Exact, ProblemKind::Energy, "infeasible", 0.5),
        ];
        let mut buf = Vec::new();
        write_results_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&(RESULTS_HEADER.join(",") + "\n0,local-search,throughput,heuristic,12.5,")), "{text}");
        assert_eq!(read_results_csv(buf.as_slice()).unwrap(), rows);
        assert!(matches!(read_results_csv("a,b\n1,2\n".as_bytes()), Err(ReportError::BadHeader)));
    }

    #[test]
    fn evolution_minimize_and_flat() {
        let log = [
            LogEntry { iter: 0, timestamp_s: 1.0, objective: 200.0 },
            LogEntry { iter: 1, timestamp_s: 2.0, objective: 150.0 },
            LogEntry { iter: 2, timestamp_s: 3.0, objective: 149.0 },
        ];
        let s = evolution_stats(&log, false).unwrap();
        assert!((s.improvement_pct - 25.5).abs() < 1e-12);
        assert_eq!(s.time_to_near_final_s, Some(2.0));
        assert_eq!(s.total_time_s, 3.0);
        let flat = evolution_stats(&log[..1], true).unwrap();
        assert_eq!((flat.improvement_pct, flat.time_to_near_final_s), (0.0, None));
        assert!(evolution_stats(&[], true).is_none());
    }
}
