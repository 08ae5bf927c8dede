//! Affine frontend power model with a sleep state, and the network total.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::NodeId;
use crate::solution::NetworkSolution;

/// Tolerance used when checking airtimes and powers against their ranges.
const RANGE_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum EnergyError {
    #[error("transmit power {p_tx_w} W outside [0, {p_max_w}] W")]
    PowerOutOfRange { p_tx_w: f64, p_max_w: f64 },
    #[error("airtime {0} outside [0, 1]")]
    AirtimeOutOfRange(f64),
    #[error("frontend {0}: activation inconsistent with transmit power")]
    InconsistentSolution(NodeId),
    #[error("total power is zero")]
    ZeroPower,
}

/// EARTH micro-cell defaults; `unit_adder_w` charges each unit with at
/// least one active frontend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerModelParams {
    pub n_trx: u32,
    pub p0_w: f64,
    pub delta_p: f64,
    pub p_sleep_w: f64,
    pub p_max_w: f64,
    pub unit_adder_w: f64,
}

impl Default for PowerModelParams {
    fn default() -> Self {
        Self { n_trx: 2, p0_w: 56.0, delta_p: 2.6, p_sleep_w: 39.0, p_max_w: 6.3, unit_adder_w: 0.0 }
    }
}

impl PowerModelParams {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.p0_w, self.delta_p, self.p_sleep_w, self.p_max_w, self.unit_adder_w];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err("power model parameters must be finite and non-negative".into());
        }
        if self.p_sleep_w > self.p0_w {
            return Err("p_sleep_w exceeds p0_w".into());
        }
        Ok(())
    }

    pub fn sleep_w(&self) -> f64 {
        f64::from(self.n_trx) * self.p_sleep_w
    }

    pub fn baseline_w(&self) -> f64 {
        f64::from(self.n_trx) * self.p0_w
    }
}

/// n_trx·p_sleep when silent, n_trx·p0 + α·Δp·P_tx otherwise.
pub fn frontend_power(params: &PowerModelParams, p_tx_w: f64, airtime_alpha: f64) -> Result<f64, EnergyError> {
    if !(p_tx_w >= 0.0) || p_tx_w > params.p_max_w * (1.0 + RANGE_TOL) {
        return Err(EnergyError::PowerOutOfRange { p_tx_w, p_max_w: params.p_max_w });
    }
    if !(airtime_alpha >= -RANGE_TOL) || airtime_alpha > 1.0 + RANGE_TOL {
        return Err(EnergyError::AirtimeOutOfRange(airtime_alpha));
    }
    if p_tx_w == 0.0 {
        return Ok(params.sleep_w());
    }
    Ok(params.baseline_w() + airtime_alpha.clamp(0.0, 1.0) * params.delta_p * p_tx_w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub per_frontend_w: BTreeMap<NodeId, f64>,
    pub units_w: f64,
    pub total_w: f64,
    pub active_count: usize,
}

/// Network power of a solution: every frontend's draw plus the per-unit adder.
pub fn total_power(solution: &NetworkSolution, params: &PowerModelParams) -> Result<EnergyReport, EnergyError> {
    let mut per_frontend_w = BTreeMap::new();
    let mut active_units = BTreeSet::new();
    let mut active_count = 0;
    for f in &solution.frontends {
        if f.active != (f.p_tx_mw > 0.0) {
            return Err(EnergyError::InconsistentSolution(f.id));
        }
        let w = frontend_power(params, f.p_tx_mw / 1000.0, solution.frontend_airtime(f.id))?;
        per_frontend_w.insert(f.id, w);
        if f.active {
            active_count += 1;
            active_units.insert(f.unit_id);
        }
    }
    let units_w = params.unit_adder_w * active_units.len() as f64;
    let total_w = per_frontend_w.values().sum::<f64>() + units_w;
    Ok(EnergyReport { per_frontend_w, units_w, total_w, active_count })
}

/// η = B / P_total.
pub fn energy_efficiency(throughput_guarantee_mbps: f64, total_w: f64) -> Result<f64, EnergyError> {
    if !(total_w > 0.0) {
        return Err(EnergyError::ZeroPower);
    }
    Ok(throughput_guarantee_mbps / total_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Link;
    use crate::solution::{FrontendState, LinkValue, ProblemKind, SolutionStatus};

    fn sol(frontends: Vec<FrontendState>, airtime: Vec<LinkValue>) -> NetworkSolution {
        NetworkSolution {
            problem: ProblemKind::Energy,
            status: SolutionStatus::Optimal,
            objective: 0.0,
            chosen_edges: vec![],
            flows: vec![],
            airtime,
            capacities: vec![],
            frontends,
            ue_rates: vec![],
            p_total_w: None,
        }
    }

    fn fe(id: u32, p_tx_mw: f64) -> FrontendState {
        FrontendState { id: NodeId(id), unit_id: id, p_tx_mw, active: p_tx_mw > 0.0 }
    }

    #[test]
    fn frontend_power_branches() {
        let p = PowerModelParams::default();
        assert_eq!(frontend_power(&p, 0.0, 0.3).unwrap(), 78.0);
        assert!((frontend_power(&p, 6.3, 1.0).unwrap() - 128.38).abs() < 1e-12);
        assert_eq!(frontend_power(&p, 3.0, 0.0).unwrap(), 112.0);
        assert!(matches!(frontend_power(&p, 7.0, 1.0), Err(EnergyError::PowerOutOfRange { .. })));
    }

    #[test]
    fn totals() {
        let p = PowerModelParams::default();
        let sleeping = sol(vec![fe(1, 0.0), fe(2, 0.0)], vec![]);
        let r = total_power(&sleeping, &p).unwrap();
        assert_eq!(r.total_w, 156.0);
        assert_eq!(r.active_count, 0);

        let a = vec![LinkValue { src: NodeId(1), dst: NodeId(9), value: 0.3 }, LinkValue { src: NodeId(1), dst: NodeId(8), value: 0.2 }];
        let one = sol(vec![fe(1, 6300.0), fe(2, 0.0)], a);
        let r = total_power(&one, &p).unwrap();
        let expect = frontend_power(&p, 6.3, 0.5).unwrap() + 78.0;
        assert!((r.total_w - expect).abs() < 1e-12);
        assert!((r.total_w - r.per_frontend_w.values().sum::<f64>()).abs() < 1e-9);
        assert_eq!(one.airtime_of(Link::new(NodeId(1), NodeId(9))), 0.3);
    }

    #[test]
    fn inconsistent_activation() {
        let mut s = sol(vec![fe(1, 100.0)], vec![]);
        s.frontends[0].active = false;
        assert_eq!(total_power(&s, &PowerModelParams::default()), Err(EnergyError::InconsistentSolution(NodeId(1))));
    }

    #[test]
    fn efficiency() {
        assert_eq!(energy_efficiency(0.0, 10.0).unwrap(), 0.0);
        assert_eq!(energy_efficiency(5.0, 100.0).unwrap(), 0.05);
        assert_eq!(energy_efficiency(5.0, 0.0), Err(EnergyError::ZeroPower));
    }

    #[test]
    fn unit_adder_counts_units_once() {
        let p = PowerModelParams { unit_adder_w: 10.0, ..Default::default() };
        let mut s = sol(vec![fe(1, 100.0), fe(2, 100.0)], vec![]);
        s.frontends[1].unit_id = 1;
        let r = total_power(&s, &p).unwrap();
        assert_eq!(r.units_w, 10.0);
    }
}
