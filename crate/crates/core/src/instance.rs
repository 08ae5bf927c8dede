//! Problem instance: graph, commodities, radio/capacity/energy parameters and
//! the power-control mode shared by both formulations.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{CapacityLevel, CapacityTable};
use crate::channel::{ChannelGains, RadioParams};
use crate::energy::PowerModelParams;
use crate::graph::{Commodity, Link, MeasurementGraph, NodeId, NodeKind};
use crate::solution::ProblemKind;

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("commodity {0}: {1}")]
    BadCommodity(u32, String),
    #[error("power mode: {0}")]
    BadPowerMode(String),
    #[error("radio parameters: {0}")]
    BadRadio(String),
    #[error("continuous power is not supported by the {0} problem")]
    UnsupportedMode(ProblemKind),
}

/// How transmit powers are decided.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PowerMode {
    /// Power per frontend in mW. The energy problem may still switch a
    /// frontend off; when on it transmits at this power.
    Fixed { powers_mw: BTreeMap<NodeId, f64> },
    Continuous,
    /// Allowed powers in mW; must be sorted and unique.
    Discrete { levels_mw: Vec<f64> },
}

impl PowerMode {
    /// Uniform grid {0, P/n, 2P/n, …, P}.
    pub fn grid(p_max_mw: f64, steps: usize) -> Self {
        let levels_mw = (0..=steps).map(|i| p_max_mw * i as f64 / steps as f64).collect();
        PowerMode::Discrete { levels_mw }
    }

    pub fn all_at(frontends: &[NodeId], p_mw: f64) -> Self {
        PowerMode::Fixed { powers_mw: frontends.iter().map(|&f| (f, p_mw)).collect() }
    }
}

/// Feasible power set of one frontend inside a model.
#[derive(Debug, Clone, PartialEq)]
pub enum PowerDomain {
    Const(f64),
    /// Positive levels in mW, plus 0 if `allow_off`.
    Levels { levels_mw: Vec<f64>, allow_off: bool },
    Continuous { max_mw: f64 },
}

impl PowerDomain {
    pub fn max_mw(&self) -> f64 {
        match self {
            PowerDomain::Const(p) => *p,
            PowerDomain::Levels { levels_mw, .. } => levels_mw.iter().copied().fold(0.0, f64::max),
            PowerDomain::Continuous { max_mw } => *max_mw,
        }
    }

    /// Smallest power the frontend can take.
    pub fn min_mw(&self) -> f64 {
        match self {
            PowerDomain::Const(p) => *p,
            PowerDomain::Levels { levels_mw, allow_off } => {
                if *allow_off {
                    0.0
                } else {
                    levels_mw.iter().copied().fold(f64::INFINITY, f64::min)
                }
            }
            PowerDomain::Continuous { .. } => 0.0,
        }
    }

    /// Smallest strictly positive power the frontend can take, if any.
    pub fn min_positive_mw(&self) -> Option<f64> {
        match self {
            PowerDomain::Const(p) => (*p > 0.0).then_some(*p),
            PowerDomain::Levels { levels_mw, .. } => levels_mw.iter().copied().filter(|&l| l > 0.0).reduce(f64::min),
            PowerDomain::Continuous { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub graph: Arc<MeasurementGraph>,
    /// Path gains of the unpruned graph: interference always comes from here.
    pub gains: Arc<ChannelGains>,
    pub commodities: Vec<Commodity>,
    pub radio: RadioParams,
    pub table: Arc<CapacityTable>,
    pub power_model: PowerModelParams,
    pub power_mode: PowerMode,
    /// Lower bound imposed on the max-min rate so that unserved UEs make the
    /// throughput problem infeasible instead of trivially optimal at 0.
    pub min_rate_mbps: f64,
}

pub const DEFAULT_MIN_RATE_MBPS: f64 = 1e-3;

impl ProblemInstance {
    pub fn new(
        graph: MeasurementGraph,
        commodities: Vec<Commodity>,
        radio: RadioParams,
        table: CapacityTable,
        power_model: PowerModelParams,
        power_mode: PowerMode,
    ) -> Result<Self, InstanceError> {
        radio.validate().map_err(InstanceError::BadRadio)?;
        let gains = ChannelGains::from_graph(&graph, &radio, 0.0);
        let inst = Self {
            graph: Arc::new(graph),
            gains: Arc::new(gains),
            commodities,
            radio,
            table: Arc::new(table),
            power_model,
            power_mode,
            min_rate_mbps: DEFAULT_MIN_RATE_MBPS,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<(), InstanceError> {
        let donor = self.graph.donor().id;
        for c in &self.commodities {
            if c.source != donor {
                return Err(InstanceError::BadCommodity(c.id, "source is not the donor".into()));
            }
            if self.graph.node(c.dest).map(|n| n.kind) != Some(NodeKind::Ue) {
                return Err(InstanceError::BadCommodity(c.id, "destination is not a UE".into()));
            }
            if !(c.demand_mbps >= 0.0 && c.demand_mbps.is_finite()) {
                return Err(InstanceError::BadCommodity(c.id, "demand must be finite and non-negative".into()));
            }
        }
        let pmax = self.radio.p_max_mw * (1.0 + 1e-12);
        match &self.power_mode {
            PowerMode::Fixed { powers_mw } => {
                for f in self.graph.frontend_ids() {
                    match powers_mw.get(&f) {
                        Some(&p) if (0.0..=pmax).contains(&p) => {}
                        Some(p) => return Err(InstanceError::BadPowerMode(format!("frontend {f}: {p} mW out of range"))),
                        None => return Err(InstanceError::BadPowerMode(format!("frontend {f} has no power"))),
                    }
                }
            }
            PowerMode::Continuous => {}
            PowerMode::Discrete { levels_mw } => {
                if levels_mw.is_empty() {
                    return Err(InstanceError::BadPowerMode("empty level list".into()));
                }
                if levels_mw.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(InstanceError::BadPowerMode("levels must be sorted and unique".into()));
                }
                if levels_mw.iter().any(|l| !(0.0..=pmax).contains(l)) {
                    return Err(InstanceError::BadPowerMode("levels must lie within [0, p_max]".into()));
                }
            }
        }
        Ok(())
    }

    /// Same parameters on a subgraph; gains (and thus interference) are kept
    /// from the original graph.
    pub fn with_graph(&self, graph: MeasurementGraph) -> Self {
        Self { graph: Arc::new(graph), ..self.clone() }
    }

    /// Adds a constant noise floor to every link's interference.
    pub fn with_noise_mw(&self, noise_mw: f64) -> Self {
        let gains = ChannelGains::from_graph(&self.graph, &self.radio, noise_mw);
        Self { gains: Arc::new(gains), ..self.clone() }
    }

    pub fn with_power_mode(&self, power_mode: PowerMode) -> Result<Self, InstanceError> {
        let inst = Self { power_mode, ..self.clone() };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_demand(&self, demand_mbps: f64) -> Self {
        let mut inst = self.clone();
        for c in &mut inst.commodities {
            c.demand_mbps = demand_mbps;
        }
        inst
    }

    pub fn frontends(&self) -> Vec<NodeId> {
        self.graph.frontend_ids()
    }

    pub fn unit_of(&self, frontend: NodeId) -> u32 {
        self.graph.node(frontend).and_then(|n| n.unit_id).unwrap_or(0)
    }

    /// Power domain of every frontend for a given problem.
    pub fn power_domains(&self, problem: ProblemKind) -> Result<BTreeMap<NodeId, PowerDomain>, InstanceError> {
        let pmax = self.radio.p_max_mw;
        let mut out = BTreeMap::new();
        for f in self.frontends() {
            let d = match (&self.power_mode, problem) {
                (PowerMode::Fixed { powers_mw }, ProblemKind::Throughput) => PowerDomain::Const(powers_mw[&f]),
                (PowerMode::Fixed { powers_mw }, ProblemKind::Energy) => {
                    let p = powers_mw[&f];
                    if p > 0.0 {
                        PowerDomain::Levels { levels_mw: vec![p], allow_off: true }
                    } else {
                        PowerDomain::Const(0.0)
                    }
                }
                (PowerMode::Continuous, ProblemKind::Throughput) => PowerDomain::Continuous { max_mw: pmax },
                (PowerMode::Continuous, ProblemKind::Energy) => return Err(InstanceError::UnsupportedMode(ProblemKind::Energy)),
                (PowerMode::Discrete { levels_mw }, _) => discrete_domain(levels_mw),
            };
            out.insert(f, d);
        }
        Ok(out)
    }

    /// Ladder level of `link` at the given powers.
    pub fn link_level(&self, link: Link, powers_mw: &BTreeMap<NodeId, f64>) -> CapacityLevel {
        let b = self.gains.budget(link, powers_mw);
        self.table.capacity_from_sinr(b.signal_mw, b.interference_mw)
    }

    pub fn commodity_of_ue(&self, ue: NodeId) -> Option<&Commodity> {
        self.commodities.iter().find(|c| c.dest == ue)
    }
}

pub fn discrete_domain(levels_mw: &[f64]) -> PowerDomain {
    let allow_off = levels_mw.iter().any(|&l| l == 0.0);
    let positive: Vec<f64> = levels_mw.iter().copied().filter(|&l| l > 0.0).collect();
    if positive.is_empty() {
        PowerDomain::Const(0.0)
    } else {
        PowerDomain::Levels { levels_mw: positive, allow_off }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::default_table;
    use crate::graph::{Edge, Node};

    fn inst(mode: PowerMode) -> Result<ProblemInstance, InstanceError> {
        let g = MeasurementGraph::build(
            vec![Node::donor(0, 0, [0.0; 3]), Node::frontend(1, 0, [0.0, 0.0, 10.0], 0.0), Node::ue(2, [50.0, 0.0, 1.5], false)],
            vec![Edge::wired(0, 1), Edge::wireless(1, 2, 90.0, true)],
        )
        .unwrap();
        let c = g.commodities(0.0);
        ProblemInstance::new(g, c, RadioParams::default(), default_table(100.0, 4).unwrap(), PowerModelParams::default(), mode)
    }

    #[test]
    fn grid_and_domains() {
        let PowerMode::Discrete { levels_mw } = PowerMode::grid(6300.0, 8) else { panic!() };
        assert_eq!(levels_mw.len(), 9);
        assert_eq!(levels_mw[8], 6300.0);
        let i = inst(PowerMode::grid(6300.0, 8)).unwrap();
        let d = i.power_domains(ProblemKind::Energy).unwrap();
        assert_eq!(d[&NodeId(1)].min_positive_mw(), Some(787.5));
        assert_eq!(d[&NodeId(1)].min_mw(), 0.0);
    }

    #[test]
    fn mode_validation() {
        assert!(inst(PowerMode::Discrete { levels_mw: vec![10.0, 5.0] }).is_err());
        assert!(inst(PowerMode::Discrete { levels_mw: vec![0.0, 7000.0] }).is_err());
        assert!(inst(PowerMode::Fixed { powers_mw: BTreeMap::new() }).is_err());
        let c = inst(PowerMode::Continuous).unwrap();
        assert_eq!(c.power_domains(ProblemKind::Energy), Err(InstanceError::UnsupportedMode(ProblemKind::Energy)));
    }
}
