//! Solver-independent network solution record.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::{Link, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Throughput,
    Energy,
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemKind::Throughput => "throughput",
            ProblemKind::Energy => "energy",
        })
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "throughput" => Ok(ProblemKind::Throughput),
            "energy" => Ok(ProblemKind::Energy),
            other => Err(format!("unknown problem '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolutionStatus {
    Optimal,
    Feasible { gap: f64 },
    TimeLimit,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkValue {
    pub src: NodeId,
    pub dst: NodeId,
    pub value: f64,
}

impl LinkValue {
    pub fn link(&self) -> Link {
        Link::new(self.src, self.dst)
    }
}

/// Capacity claim of a chosen wireless link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkCapacity {
    pub src: NodeId,
    pub dst: NodeId,
    /// Ladder position granted to the link, `None` when below the first step.
    pub level: Option<usize>,
    /// Ladder capacity at that level (full airtime).
    pub capacity_mbps: f64,
    /// Airtime-weighted capacity c(u,v) actually offered.
    pub throughput_mbps: f64,
}

impl LinkCapacity {
    pub fn link(&self) -> Link {
        Link::new(self.src, self.dst)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommodityFlow {
    pub commodity: u32,
    pub dest: NodeId,
    /// Mbps for throughput solutions, 0/1 routing indicators for energy ones.
    pub links: Vec<LinkValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontendState {
    pub id: NodeId,
    pub unit_id: u32,
    pub p_tx_mw: f64,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRate {
    pub ue: NodeId,
    pub rate_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSolution {
    pub problem: ProblemKind,
    pub status: SolutionStatus,
    pub objective: f64,
    pub chosen_edges: Vec<Link>,
    pub flows: Vec<CommodityFlow>,
    pub airtime: Vec<LinkValue>,
    pub capacities: Vec<LinkCapacity>,
    pub frontends: Vec<FrontendState>,
    pub ue_rates: Vec<UeRate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_total_w: Option<f64>,
}

impl NetworkSolution {
    pub fn powers_mw(&self) -> BTreeMap<NodeId, f64> {
        self.frontends.iter().map(|f| (f.id, f.p_tx_mw)).collect()
    }

    pub fn airtime_of(&self, link: Link) -> f64 {
        self.airtime.iter().find(|a| a.link() == link).map_or(0.0, |a| a.value)
    }

    /// Sum of outgoing airtime of a frontend (its transmit duty cycle).
    pub fn frontend_airtime(&self, id: NodeId) -> f64 {
        self.airtime.iter().filter(|a| a.src == id).map(|a| a.value).sum()
    }

    pub fn active_count(&self) -> usize {
        self.frontends.iter().filter(|f| f.active).count()
    }

    pub fn min_ue_rate(&self) -> Option<f64> {
        self.ue_rates.iter().map(|r| r.rate_mbps).reduce(f64::min)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serialization is infallible")
    }

    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json_string())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| e.to_string())?;
        Self::from_json_str(&text).map_err(|e| format!("line {} column {}: {e}", e.line(), e.column()))
    }
}
