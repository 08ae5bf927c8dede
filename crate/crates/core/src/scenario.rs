//! Synthetic scenarios: seeded unit and UE placement, hourly UE density from
//! a load profile, and measurement-graph assembly.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{default_table, CapacityError};
use crate::channel::{geometric_pathloss, los_probability_umi, RadioParams};
use crate::energy::PowerModelParams;
use crate::graph::{Commodity, Edge, GraphError, MeasurementGraph, Node, NodeId};
use crate::instance::{InstanceError, PowerMode, ProblemInstance};

pub const HOURS_PER_WEEK: u32 = 168;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("hour {hour}: load {p} is outside (0, 1]")]
    BadRange { hour: u32, p: f64 },
    #[error("hour {0} appears twice")]
    DuplicateHour(u32),
    #[error("hour {0} is outside 0..168")]
    BadHour(u32),
    #[error("hour {0} is not in the load profile")]
    MissingHour(u32),
    #[error("scenario has no units")]
    EmptyScenario,
    #[error("config: {0}")]
    BadConfig(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "rule", content = "unit")]
pub enum DonorRule {
    /// Unit closest to the centroid of all units, lowest index on ties.
    #[default]
    NearestCentroid,
    Unit(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub area_km2: f64,
    /// Units per km².
    pub lambda_gnb: f64,
    pub sectors_per_unit: u32,
    pub l_ue_per_gnb: f64,
    pub r_indoor: f64,
    pub radio: RadioParams,
    pub power_model: PowerModelParams,
    pub seed: u64,
    pub donor_rule: DonorRule,
    pub coupling_cutoff_db: f64,
    pub h_gnb_m: f64,
    pub h_ue_m: f64,
    /// Demand of every commodity in Mbps.
    pub demand_mbps: f64,
    /// Unit positions (x, y) in metres; replaces random placement.
    pub unit_positions: Option<Vec<[f64; 2]>>,
    /// UE positions (x, y) in metres; replaces random placement.
    pub ue_positions: Option<Vec<[f64; 2]>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_km2: 0.25,
            lambda_gnb: 20.0,
            sectors_per_unit: 3,
            l_ue_per_gnb: 10.0,
            r_indoor: 0.8,
            radio: RadioParams::default(),
            power_model: PowerModelParams::default(),
            seed: 0,
            donor_rule: DonorRule::NearestCentroid,
            coupling_cutoff_db: 160.0,
            h_gnb_m: 10.0,
            h_ue_m: 1.5,
            demand_mbps: 0.0,
            unit_positions: None,
            ue_positions: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self, ScenarioError> {
        let c: Self = serde_json::from_str(s).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let s = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(e.to_string()))?;
        Self::from_json_str(&s)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::BadConfig(m.into()));
        if !(self.area_km2 > 0.0) {
            return bad("area_km2 must be positive");
        }
        if !(self.lambda_gnb >= 0.0) || !(self.l_ue_per_gnb >= 0.0) {
            return bad("densities must be non-negative");
        }
        if !(1..=3).contains(&self.sectors_per_unit) {
            return bad("sectors_per_unit must be 1, 2 or 3");
        }
        if !(0.0..=1.0).contains(&self.r_indoor) {
            return bad("r_indoor must lie in [0, 1]");
        }
        if ![3.6, 7.0].contains(&self.radio.carrier_ghz) {
            return bad("carrier_ghz must be 3.6 or 7.0");
        }
        if ![100.0, 400.0].contains(&self.radio.bandwidth_mhz) {
            return bad("bandwidth_mhz must be 100 or 400");
        }
        if !(self.demand_mbps >= 0.0) {
            return bad("demand_mbps must be non-negative");
        }
        self.radio.validate().map_err(ScenarioError::BadConfig)?;
        self.power_model.validate().map_err(ScenarioError::BadConfig)?;
        Ok(())
    }

    pub fn side_m(&self) -> f64 {
        self.area_km2.sqrt() * 1000.0
    }
}

/// Normalized hourly cell load.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadProfile {
    points: BTreeMap<u32, f64>,
}

#[derive(Deserialize)]
struct LoadRow {
    hour: u32,
    p: f64,
}

impl LoadProfile {
    pub fn new(points: impl IntoIterator<Item = (u32, f64)>) -> Result<Self, ScenarioError> {
        let mut out = BTreeMap::new();
        for (hour, p) in points {
            if hour >= HOURS_PER_WEEK {
                return Err(ScenarioError::BadHour(hour));
            }
            if !(p > 0.0 && p <= 1.0) {
                return Err(ScenarioError::BadRange { hour, p });
            }
            if out.insert(hour, p).is_some() {
                return Err(ScenarioError::DuplicateHour(hour));
            }
        }
        Ok(Self { points: out })
    }

    /// Same load at every hour of the week.
    pub fn constant(p: f64) -> Result<Self, ScenarioError> {
        Self::new((0..HOURS_PER_WEEK).map(|h| (h, p)))
    }

    pub fn from_csv_reader<R: Read>(r: R) -> Result<Self, ScenarioError> {
        let mut rows = Vec::new();
        for row in csv::Reader::from_reader(r).deserialize::<LoadRow>() {
            let row = row.map_err(|e| ScenarioError::Parse(e.to_string()))?;
            rows.push((row.hour, row.p));
        }
        Self::new(rows)
    }

    pub fn get(&self, hour: u32) -> Option<f64> {
        self.points.get(&hour).copied()
    }

    pub fn hours(&self) -> impl Iterator<Item = u32> + '_ {
        self.points.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn load_profile_csv(path: impl AsRef<Path>) -> Result<LoadProfile, ScenarioError> {
    let f = std::fs::File::open(path).map_err(|e| ScenarioError::Io(e.to_string()))?;
    LoadProfile::from_csv_reader(f)
}

/// UEs per km² at hour `t`: p(t) · l · λ_gNB.
pub fn ue_density(profile: &LoadProfile, t: u32, config: &ScenarioConfig) -> Result<f64, ScenarioError> {
    let p = profile.get(t).ok_or(ScenarioError::MissingHour(t))?;
    Ok(p * config.l_ue_per_gnb * config.lambda_gnb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub hour: u32,
    pub ue_density: f64,
    pub graph: MeasurementGraph,
    pub commodities: Vec<Commodity>,
    /// UEs with no candidate link under the coupling cutoff.
    pub dropped_ues: Vec<NodeId>,
}

impl Scenario {
    pub fn instance(&self, config: &ScenarioConfig, power_mode: PowerMode) -> Result<ProblemInstance, ScenarioError> {
        let table = default_table(config.radio.bandwidth_mhz, config.radio.mimo_layers)?;
        Ok(ProblemInstance::new(self.graph.clone(), self.commodities.clone(), config.radio.clone(), table, config.power_model.clone(), power_mode)?)
    }
}

fn unit_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// UE stream of hour `t`; unit placement uses stream 0 so it is shared by all hours.
fn hour_rng(seed: u64, t: u32) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(t as u64 + 1);
    r
}

fn uniform_point(rng: &mut ChaCha8Rng, side: f64) -> [f64; 2] {
    [rng.gen_range(0.0..side), rng.gen_range(0.0..side)]
}

fn pick_donor(units: &[[f64; 2]], rule: DonorRule) -> Result<usize, ScenarioError> {
    match rule {
        DonorRule::Unit(i) if i < units.len() => Ok(i),
        DonorRule::Unit(i) => Err(ScenarioError::BadConfig(format!("donor unit {i} does not exist"))),
        DonorRule::NearestCentroid => {
            let n = units.len() as f64;
            let cx = units.iter().map(|p| p[0]).sum::<f64>() / n;
            let cy = units.iter().map(|p| p[1]).sum::<f64>() / n;
            let d = |p: &[f64; 2]| (p[0] - cx).powi(2) + (p[1] - cy).powi(2);
            Ok((0..units.len()).min_by(|&a, &b| d(&units[a]).total_cmp(&d(&units[b])).then(a.cmp(&b))).expect("non-empty"))
        }
    }
}

/// Builds the measurement graph of hour `t`.
pub fn generate(config: &ScenarioConfig, profile: &LoadProfile, t: u32) -> Result<Scenario, ScenarioError> {
    config.validate()?;
    let density = ue_density(profile, t, config)?;
    let side = config.side_m();

    let units: Vec<[f64; 2]> = match &config.unit_positions {
        Some(p) => p.clone(),
        None => {
            let mut rng = unit_rng(config.seed);
            let n = (config.lambda_gnb * config.area_km2).round() as usize;
            (0..n).map(|_| uniform_point(&mut rng, side)).collect()
        }
    };
    if units.is_empty() {
        return Err(ScenarioError::EmptyScenario);
    }
    let donor = pick_donor(&units, config.donor_rule)?;

    let mut rng = hour_rng(config.seed, t);
    let ue_xy: Vec<[f64; 2]> = match &config.ue_positions {
        Some(p) => p.clone(),
        None => {
            let n = (density * config.area_km2).round() as usize;
            (0..n).map(|_| uniform_point(&mut rng, side)).collect()
        }
    };

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut next = 0u32;
    let mut baseband = Vec::with_capacity(units.len());
    let mut unit_frontends: Vec<Vec<u32>> = Vec::with_capacity(units.len());
    for (u, xy) in units.iter().enumerate() {
        let pos = [xy[0], xy[1], config.h_gnb_m];
        let bb = next;
        next += 1;
        nodes.push(if u == donor { Node::donor(bb, u as u32, pos) } else { Node::mt_du(bb, u as u32, pos) });
        baseband.push(bb);
        let mut fs = Vec::new();
        for s in 0..config.sectors_per_unit {
            let az = 360.0 * s as f64 / config.sectors_per_unit as f64;
            nodes.push(Node::frontend(next, u as u32, pos, az));
            edges.push(Edge::wired(bb, next));
            fs.push(next);
            next += 1;
        }
        unit_frontends.push(fs);
    }
    let mut ues = Vec::with_capacity(ue_xy.len());
    for xy in &ue_xy {
        let indoor = rng.gen_bool(config.r_indoor);
        ues.push(Node::ue(next, [xy[0], xy[1], config.h_ue_m], indoor));
        next += 1;
    }

    let by_id: BTreeMap<u32, Node> = nodes.iter().map(|n| (n.id.0, n.clone())).collect();
    let mut candidate = |tx_unit: usize, rx: &Node, edges: &mut Vec<Edge>| -> bool {
        let tx_pos = units[tx_unit];
        let d2d = ((rx.pos[0] - tx_pos[0]).powi(2) + (rx.pos[1] - tx_pos[1]).powi(2)).sqrt();
        let los = rng.gen_bool(los_probability_umi(d2d).clamp(0.0, 1.0));
        let mut any = false;
        for &f in &unit_frontends[tx_unit] {
            let Ok(pl) = geometric_pathloss(&by_id[&f], rx, config.radio.carrier_ghz, los) else { continue };
            if pl <= config.coupling_cutoff_db {
                edges.push(Edge::wireless(f, rx.id.0, pl, los && !(rx.indoor && rx.kind == crate::graph::NodeKind::Ue)));
                any = true;
            }
        }
        any
    };
    // backhaul candidates between units
    for (v, &bb) in baseband.iter().enumerate() {
        if v == donor {
            continue;
        }
        let rx = by_id[&bb].clone();
        for u in 0..units.len() {
            if u != v {
                candidate(u, &rx, &mut edges);
            }
        }
    }
    let mut dropped = Vec::new();
    let mut kept_ues = Vec::new();
    for ue in ues {
        let mut local = Vec::new();
        let mut reached = false;
        for u in 0..units.len() {
            reached |= candidate(u, &ue, &mut local);
        }
        if reached {
            edges.extend(local);
            kept_ues.push(ue);
        } else {
            dropped.push(ue.id);
        }
    }
    nodes.extend(kept_ues);
    let graph = MeasurementGraph::build(nodes, edges)?;
    let commodities = graph.commodities(config.demand_mbps);
    Ok(Scenario { hour: t, ue_density: density, graph, commodities, dropped_ues: dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_validation() {
        assert!(LoadProfile::constant(0.5).is_ok());
        assert_eq!(LoadProfile::new([(0, 0.0)]), Err(ScenarioError::BadRange { hour: 0, p: 0.0 }));
        assert_eq!(LoadProfile::new([(0, 1.2)]), Err(ScenarioError::BadRange { hour: 0, p: 1.2 }));
        assert_eq!(LoadProfile::new([(3, 0.2), (3, 0.4)]), Err(ScenarioError::DuplicateHour(3)));
        let p = LoadProfile::from_csv_reader("hour,p\n0,0.5\n1,1.0\n".as_bytes()).unwrap();
        assert_eq!(p.get(1), Some(1.0));
    }

    #[test]
    fn density_formula() {
        let cfg = ScenarioConfig { lambda_gnb: 18.0, ..ScenarioConfig::default() };
        let p = LoadProfile::new([(0, 0.5)]).unwrap();
        assert!((ue_density(&p, 0, &cfg).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(ue_density(&p, 1, &cfg), Err(ScenarioError::MissingHour(1)));
    }

    #[test]
    fn deterministic_and_valid() {
        let cfg = ScenarioConfig { seed: 7, ..ScenarioConfig::default() };
        let p = LoadProfile::constant(0.6).unwrap();
        let a = generate(&cfg, &p, 3).unwrap();
        let b = generate(&cfg, &p, 3).unwrap();
        assert_eq!(a.graph.to_json_string(), b.graph.to_json_string());
        assert_eq!(a.graph.nodes_of(crate::graph::NodeKind::Frontend).count(), 15);
        let c = generate(&cfg, &p, 4).unwrap();
        // units are shared across hours
        assert_eq!(a.graph.donor().pos, c.graph.donor().pos);
    }

    #[test]
    fn no_units_is_an_error() {
        let cfg = ScenarioConfig { lambda_gnb: 0.0, ..ScenarioConfig::default() };
        assert_eq!(generate(&cfg, &LoadProfile::constant(1.0).unwrap(), 0), Err(ScenarioError::EmptyScenario));
    }
}
