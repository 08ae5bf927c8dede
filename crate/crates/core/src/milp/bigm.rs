//! Big-M constants and per-link threshold planning.

use std::collections::BTreeMap;

use crate::graph::{Link, NodeId};
use crate::instance::{PowerDomain, ProblemInstance};

/// Physical big-M values of one link, in mW.
#[derive(Debug, Clone, PartialEq)]
pub struct BigM {
    /// Bound on S(u,v) − th_i·I(u,v) from above: the largest signal.
    pub m_upper: f64,
    /// Per threshold, bound on th_i·I(u,v) − S(u,v): th_i times the largest interference.
    pub m_lower: Vec<f64>,
}

/// Big-M pair for `link` with every frontend at the top of its domain.
pub fn compute_big_m(link: Link, instance: &ProblemInstance, domains: &BTreeMap<NodeId, PowerDomain>, cap: Option<f64>) -> BigM {
    let pmax = |f: NodeId| domains.get(&f).map_or(instance.radio.p_max_mw, PowerDomain::max_mw);
    let s_max = pmax(link.src) * instance.gains.serving_gain(link);
    let i_max = instance.gains.noise_mw + instance.gains.interferers_of(link).map(|(r, g)| pmax(r) * g).sum::<f64>();
    let clamp = |m: f64| cap.map_or(m, |c| m.min(c));
    BigM {
        m_upper: clamp(s_max),
        m_lower: instance.table.thresholds_lin().iter().map(|th| clamp(th * i_max)).collect(),
    }
}

/// Status of one ladder step on one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelFeasibility {
    /// Unreachable at any admissible power assignment.
    Never,
    /// Met at every admissible power assignment.
    Always,
    /// Depends on the powers: needs an indicator.
    Variable,
}

/// Per-link quantities needed to encode the thresholds.
#[derive(Debug, Clone)]
pub struct LinkPlan {
    pub link: Link,
    pub s_max: f64,
    pub s_min: f64,
    pub i_min: f64,
    pub i_max: f64,
    pub levels: Vec<LevelFeasibility>,
}

impl LinkPlan {
    pub fn usable(&self) -> bool {
        self.levels.iter().any(|l| *l != LevelFeasibility::Never)
    }
}

const REL_MARGIN: f64 = 1e-12;

pub fn plan_link(link: Link, instance: &ProblemInstance, domains: &BTreeMap<NodeId, PowerDomain>) -> LinkPlan {
    let g_s = instance.gains.serving_gain(link);
    let src = domains.get(&link.src);
    let s_max = src.map_or(0.0, PowerDomain::max_mw) * g_s;
    let s_min = src.map_or(0.0, PowerDomain::min_mw) * g_s;
    let noise = instance.gains.noise_mw;
    let (mut i_min, mut i_max) = (noise, noise);
    for (r, g) in instance.gains.interferers_of(link) {
        if let Some(d) = domains.get(&r) {
            i_min += d.min_mw() * g;
            i_max += d.max_mw() * g;
        }
    }
    let levels = instance
        .table
        .thresholds_lin()
        .iter()
        .map(|&th| {
            if !(s_max > 0.0) || s_max < th * i_min * (1.0 - REL_MARGIN) {
                LevelFeasibility::Never
            } else if s_min > 0.0 && s_min >= th * i_max * (1.0 + REL_MARGIN) {
                LevelFeasibility::Always
            } else {
                LevelFeasibility::Variable
            }
        })
        .collect();
    LinkPlan { link, s_max, s_min, i_min, i_max, levels }
}
