//! UMi street-canyon pathloss, O2I penetration, and the signal/interference
//! arithmetic used by every solver.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Link, MeasurementGraph, Node, NodeId, NodeKind};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Half-width of the main lobe around a sector azimuth.
pub const MAIN_LOBE_HALF_WIDTH_DEG: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("outside the UMi model range: {0}")]
    OutOfModelRange(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioParams {
    pub g_tx_main_dbi: f64,
    pub g_tx_side_dbi: f64,
    pub g_rx_main_dbi: f64,
    pub g_rx_side_dbi: f64,
    pub p_max_mw: f64,
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub mimo_layers: u32,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            g_tx_main_dbi: 24.0,
            g_tx_side_dbi: -2.0,
            g_rx_main_dbi: 0.0,
            g_rx_side_dbi: -17.85,
            p_max_mw: 6300.0,
            carrier_ghz: 3.6,
            bandwidth_mhz: 100.0,
            mimo_layers: 4,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.p_max_mw > 0.0) {
            return Err("p_max_mw must be positive".into());
        }
        if self.g_tx_main_dbi < self.g_tx_side_dbi || self.g_rx_main_dbi < self.g_rx_side_dbi {
            return Err("main-lobe gain below side-lobe gain".into());
        }
        if self.mimo_layers == 0 {
            return Err("mimo_layers must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub signal_mw: f64,
    pub interference_mw: f64,
    pub sinr_db: f64,
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// 10·log10(S/I); +∞ for I = 0 and S > 0.
pub fn sinr_db(signal_mw: f64, interference_mw: f64) -> f64 {
    if interference_mw <= 0.0 {
        if signal_mw > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        }
    } else {
        lin_to_db(signal_mw / interference_mw)
    }
}

/// Median UMi street-canyon pathloss in dB (positive attenuation).
///
/// `d2d_m` below 10 m is clamped to 10 m, the lower edge of the model.
pub fn pathloss_umi(carrier_ghz: f64, d2d_m: f64, d3d_m: f64, h_bs_m: f64, h_ut_m: f64, los: bool) -> Result<f64, ChannelError> {
    if !(0.5..=100.0).contains(&carrier_ghz) {
        return Err(ChannelError::OutOfModelRange(format!("carrier {carrier_ghz} GHz")));
    }
    if !(d2d_m > 0.0) || !(d3d_m > 0.0) || !(h_bs_m > 0.0) || !(h_ut_m > 0.0) {
        return Err(ChannelError::OutOfModelRange("distances and heights must be positive".into()));
    }
    if d2d_m > 5000.0 {
        return Err(ChannelError::OutOfModelRange(format!("2D distance {d2d_m} m exceeds 5 km")));
    }
    let dh = h_bs_m - h_ut_m;
    let (d2d, d3d) = if d2d_m < 10.0 { (10.0, d3d_m.max((100.0 + dh * dh).sqrt())) } else { (d2d_m, d3d_m) };

    let h_e = 1.0;
    let d_bp = 4.0 * (h_bs_m - h_e) * (h_ut_m - h_e) * carrier_ghz * 1e9 / SPEED_OF_LIGHT;
    let f_log = 20.0 * carrier_ghz.log10();
    let pl_los = if d2d <= d_bp {
        32.4 + 21.0 * d3d.log10() + f_log
    } else {
        32.4 + 40.0 * d3d.log10() + f_log - 9.5 * (d_bp * d_bp + dh * dh).log10()
    };
    if los {
        return Ok(pl_los);
    }
    let pl_nlos = 35.3 * d3d.log10() + 22.4 + 21.3 * carrier_ghz.log10() - 0.3 * (h_ut_m - 1.5);
    Ok(pl_los.max(pl_nlos))
}

/// O2I high-loss penetration (median): IRR-glass/concrete mix plus indoor loss.
pub fn o2i_loss(carrier_ghz: f64) -> f64 {
    let l_irr_glass = 23.0 + 0.3 * carrier_ghz;
    let l_concrete = 5.0 + 4.0 * carrier_ghz;
    let pl_tw = 5.0 - 10.0 * (0.3 * 10f64.powf(-l_irr_glass / 10.0) + 0.7 * 10f64.powf(-l_concrete / 10.0)).log10();
    // indoor distance uniform on [0, 25] m in each of two draws, min taken; 0.5·d_in median
    let d_in_median = 25.0 * (1.0 - std::f64::consts::FRAC_1_SQRT_2);
    pl_tw + 0.5 * d_in_median
}

/// UMi LOS probability as a function of 2D distance.
pub fn los_probability_umi(d2d_m: f64) -> f64 {
    if d2d_m <= 18.0 {
        1.0
    } else {
        18.0 / d2d_m + (-d2d_m / 36.0).exp() * (1.0 - 18.0 / d2d_m)
    }
}

/// S = P · 10^{Gtx/10} · 10^{Grx/10} · 10^{-PL/10}.
pub fn link_signal(p_tx_mw: f64, g_tx_dbi: f64, g_rx_dbi: f64, pathloss_db: f64) -> f64 {
    p_tx_mw * db_to_lin(g_tx_dbi + g_rx_dbi - pathloss_db)
}

/// True when `rx` lies inside the main lobe of frontend `tx`.
pub fn in_main_lobe(tx: &Node, rx: &Node) -> bool {
    let Some(az) = tx.sector_azimuth_deg else { return true };
    let dx = rx.pos[0] - tx.pos[0];
    let dy = rx.pos[1] - tx.pos[1];
    if dx == 0.0 && dy == 0.0 {
        return true;
    }
    let bearing = dy.atan2(dx).to_degrees();
    let diff = (bearing - az + 540.0).rem_euclid(360.0) - 180.0;
    diff.abs() <= MAIN_LOBE_HALF_WIDTH_DEG + 1e-9
}

pub fn tx_gain_dbi(tx: &Node, rx: &Node, radio: &RadioParams) -> f64 {
    if in_main_lobe(tx, rx) {
        radio.g_tx_main_dbi
    } else {
        radio.g_tx_side_dbi
    }
}

/// Interference at the receiver of `victim` from every other frontend.
pub fn link_interference(victim: Link, powers_mw: &BTreeMap<NodeId, f64>, graph: &MeasurementGraph, radio: &RadioParams) -> f64 {
    let Some(rx) = graph.node(victim.dst) else { return 0.0 };
    let mut total = 0.0;
    for &ei in graph.in_edges(victim.dst) {
        let e = &graph.edges()[ei];
        if !e.is_wireless() || e.src == victim.src {
            continue;
        }
        let p = powers_mw.get(&e.src).copied().unwrap_or(0.0);
        if p <= 0.0 {
            continue;
        }
        let tx = graph.node(e.src).expect("edge endpoints exist");
        total += link_signal(p, tx_gain_dbi(tx, rx, radio), radio.g_rx_side_dbi, e.pathloss_db.unwrap_or(f64::INFINITY));
    }
    total
}

/// Budget of one wireless link given every frontend's transmit power.
pub fn link_budget(link: Link, powers_mw: &BTreeMap<NodeId, f64>, graph: &MeasurementGraph, radio: &RadioParams, noise_mw: f64) -> Option<LinkBudget> {
    let e = graph.edge(link)?;
    let pl = e.pathloss_db?;
    let tx = graph.node(link.src)?;
    let rx = graph.node(link.dst)?;
    let p = powers_mw.get(&link.src).copied().unwrap_or(0.0);
    let signal_mw = link_signal(p, tx_gain_dbi(tx, rx, radio), radio.g_rx_main_dbi, pl);
    let interference_mw = noise_mw + link_interference(link, powers_mw, graph, radio);
    Some(LinkBudget { signal_mw, interference_mw, sinr_db: sinr_db(signal_mw, interference_mw) })
}

/// Linear path gains (antenna gains and pathloss folded in) for every
/// wireless edge of a graph, precomputed once per instance.
#[derive(Debug, Clone)]
pub struct ChannelGains {
    serving: HashMap<Link, f64>,
    /// receiver -> [(interfering frontend, linear gain with rx side lobe)]
    interferers: HashMap<NodeId, Vec<(NodeId, f64)>>,
    pub noise_mw: f64,
}

impl ChannelGains {
    pub fn from_graph(graph: &MeasurementGraph, radio: &RadioParams, noise_mw: f64) -> Self {
        let mut serving = HashMap::new();
        let mut interferers: HashMap<NodeId, Vec<(NodeId, f64)>> = HashMap::new();
        for (_, e) in graph.wireless_edges() {
            let tx = graph.node(e.src).expect("edge endpoints exist");
            let rx = graph.node(e.dst).expect("edge endpoints exist");
            let gtx = tx_gain_dbi(tx, rx, radio);
            let pl = e.pathloss_db.unwrap_or(f64::INFINITY);
            serving.insert(e.link(), db_to_lin(gtx + radio.g_rx_main_dbi - pl));
            interferers.entry(e.dst).or_default().push((e.src, db_to_lin(gtx + radio.g_rx_side_dbi - pl)));
        }
        for list in interferers.values_mut() {
            list.sort_by_key(|(r, _)| *r);
        }
        Self { serving, interferers, noise_mw }
    }

    /// Linear gain of `link` as a serving link (0 if unknown).
    pub fn serving_gain(&self, link: Link) -> f64 {
        self.serving.get(&link).copied().unwrap_or(0.0)
    }

    /// Interferers of a link's receiver, the serving frontend excluded.
    pub fn interferers_of(&self, link: Link) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.interferers
            .get(&link.dst)
            .map(Vec::as_slice)
            .unwrap_or(&[])
            .iter()
            .copied()
            .filter(move |(r, _)| *r != link.src)
    }

    pub fn signal(&self, link: Link, p_mw: f64) -> f64 {
        p_mw * self.serving_gain(link)
    }

    pub fn interference(&self, link: Link, powers_mw: &BTreeMap<NodeId, f64>) -> f64 {
        self.noise_mw + self.interferers_of(link).map(|(r, g)| powers_mw.get(&r).copied().unwrap_or(0.0) * g).sum::<f64>()
    }

    pub fn budget(&self, link: Link, powers_mw: &BTreeMap<NodeId, f64>) -> LinkBudget {
        let s = self.signal(link, powers_mw.get(&link.src).copied().unwrap_or(0.0));
        let i = self.interference(link, powers_mw);
        LinkBudget { signal_mw: s, interference_mw: i, sinr_db: sinr_db(s, i) }
    }
}

/// Nominal pathloss between two nodes from geometry, UE indoor flag and a
/// LOS draw. Heights come from the node positions.
pub fn geometric_pathloss(tx: &Node, rx: &Node, carrier_ghz: f64, los: bool) -> Result<f64, ChannelError> {
    let dx = rx.pos[0] - tx.pos[0];
    let dy = rx.pos[1] - tx.pos[1];
    let dz = rx.pos[2] - tx.pos[2];
    let d2d = (dx * dx + dy * dy).sqrt().max(1e-3);
    let d3d = (d2d * d2d + dz * dz).sqrt();
    let indoor = rx.kind == NodeKind::Ue && rx.indoor;
    let pl = pathloss_umi(carrier_ghz, d2d, d3d, tx.pos[2], rx.pos[2], los && !indoor)?;
    Ok(if indoor { pl + o2i_loss(carrier_ghz) } else { pl })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    // Independent transcription used as oracle.
    fn umi_los_oracle(f: f64, d2: f64, d3: f64, hb: f64, hu: f64) -> f64 {
        let dbp = 4.0 * (hb - 1.0) * (hu - 1.0) * f * 1e9 / 3.0e8;
        if d2 <= dbp {
            32.4 + 21.0 * d3.log10() + 20.0 * f.log10()
        } else {
            32.4 + 40.0 * d3.log10() + 20.0 * f.log10() - 9.5 * (dbp.powi(2) + (hb - hu).powi(2)).log10()
        }
    }

    #[test]
    fn los_pathloss_matches_oracle() {
        let d2: f64 = (100.0f64.powi(2) - 8.5f64.powi(2)).sqrt();
        let pl = pathloss_umi(3.6, d2, 100.0, 10.0, 1.5, true).unwrap();
        assert!((pl - umi_los_oracle(3.6, d2, 100.0, 10.0, 1.5)).abs() < 1e-9);
        assert!((pl - 85.526).abs() < 1e-3, "{pl}");
        // beyond breakpoint
        let pl2 = pathloss_umi(3.6, 900.0, 900.05, 10.0, 1.5, true).unwrap();
        assert!((pl2 - umi_los_oracle(3.6, 900.0, 900.05, 10.0, 1.5)).abs() < 0.01);
    }

    #[test]
    fn pathloss_monotone() {
        let near = pathloss_umi(3.6, 50.0, 50.7, 10.0, 1.5, true).unwrap();
        let far = pathloss_umi(3.6, 200.0, 200.2, 10.0, 1.5, true).unwrap();
        assert!(far > near);
        assert!(pathloss_umi(7.0, 80.0, 80.5, 10.0, 1.5, false).unwrap() > pathloss_umi(3.6, 80.0, 80.5, 10.0, 1.5, false).unwrap());
        assert!(pathloss_umi(3.6, 80.0, 80.5, 10.0, 1.5, false).unwrap() >= pathloss_umi(3.6, 80.0, 80.5, 10.0, 1.5, true).unwrap());
    }

    #[test]
    fn out_of_range() {
        assert!(pathloss_umi(0.1, 50.0, 50.0, 10.0, 1.5, true).is_err());
        assert!(pathloss_umi(3.6, -1.0, 50.0, 10.0, 1.5, true).is_err());
    }

    #[test]
    fn o2i_high_values() {
        let oracle = |f: f64| {
            let tw = 5.0 - 10.0 * (0.3 * 10f64.powf(-(23.0 + 0.3 * f) / 10.0) + 0.7 * 10f64.powf(-(5.0 + 4.0 * f) / 10.0)).log10();
            tw + 0.5 * 25.0 * (1.0 - 1.0 / 2f64.sqrt())
        };
        assert!((o2i_loss(3.6) - oracle(3.6)).abs() < 1e-12);
        assert!((o2i_loss(3.6) - 29.0).abs() < 0.1, "{}", o2i_loss(3.6));
        assert!(o2i_loss(7.0) > o2i_loss(3.6));
    }

    #[test]
    fn signal_arithmetic() {
        assert!((link_signal(1.0, 0.0, 0.0, 0.0) - 1.0).abs() < 1e-15);
        let s = link_signal(1000.0, 24.0, 0.0, 100.0);
        assert!((s - 2.5119e-5).abs() < 1e-8);
        assert!((link_signal(2000.0, 24.0, 0.0, 100.0) - 2.0 * s).abs() < 1e-18);
    }

    fn star() -> MeasurementGraph {
        // donor frontends 1..=3 all hit UE 9 with identical parameters
        let mut nodes = vec![Node::donor(0, 0, [0.0, 0.0, 10.0]), Node::ue(9, [50.0, 0.0, 1.5], false)];
        let mut edges = vec![];
        for (i, u) in [(1, 0u32), (2, 1), (3, 2)] {
            if u == 0 {
                nodes.push(Node::frontend(i, 0, [0.0, 0.0, 10.0], 0.0));
                edges.push(Edge::wired(0, i));
            } else {
                nodes.push(Node::mt_du(10 + u, u, [0.0, 0.0, 10.0]));
                nodes.push(Node::frontend(i, u, [0.0, 0.0, 10.0], 0.0));
                edges.push(Edge::wired(10 + u, i));
            }
            edges.push(Edge::wireless(i, 9, 90.0 + i as f64, true));
        }
        MeasurementGraph::build(nodes, edges).unwrap()
    }

    #[test]
    fn interference_sums() {
        let g = star();
        let radio = RadioParams::default();
        let victim = Link::new(NodeId(1), NodeId(9));
        let zero: BTreeMap<_, _> = [(NodeId(1), 100.0), (NodeId(2), 0.0), (NodeId(3), 0.0)].into();
        assert_eq!(link_interference(victim, &zero, &g, &radio), 0.0);

        let p: BTreeMap<_, _> = [(NodeId(1), 100.0), (NodeId(2), 200.0), (NodeId(3), 300.0)].into();
        let brute = link_signal(200.0, 24.0, -17.85, 92.0) + link_signal(300.0, 24.0, -17.85, 93.0);
        let i = link_interference(victim, &p, &g, &radio);
        assert!((i - brute).abs() < 1e-15 * brute.max(1.0));

        let gains = ChannelGains::from_graph(&g, &radio, 0.0);
        assert!((gains.interference(victim, &p) - i).abs() < 1e-20);
        let b = link_budget(victim, &p, &g, &radio, 0.0).unwrap();
        assert!((b.signal_mw - link_signal(100.0, 24.0, 0.0, 91.0)).abs() < 1e-18);
    }

    #[test]
    fn symmetric_interferer_equals_signal() {
        let radio = RadioParams { g_rx_side_dbi: 0.0, ..RadioParams::default() };
        let nodes = vec![
            Node::donor(0, 0, [0.0, 0.0, 10.0]),
            Node::frontend(1, 0, [0.0, 0.0, 10.0], 0.0),
            Node::mt_du(2, 1, [0.0, 0.0, 10.0]),
            Node::frontend(3, 1, [0.0, 0.0, 10.0], 0.0),
            Node::ue(4, [40.0, 0.0, 1.5], false),
        ];
        let edges = vec![Edge::wired(0, 1), Edge::wired(2, 3), Edge::wireless(1, 4, 95.0, true), Edge::wireless(3, 4, 95.0, true)];
        let g = MeasurementGraph::build(nodes, edges).unwrap();
        let p: BTreeMap<_, _> = [(NodeId(1), 500.0), (NodeId(3), 500.0)].into();
        let b = link_budget(Link::new(NodeId(1), NodeId(4)), &p, &g, &radio, 0.0).unwrap();
        assert!((b.signal_mw - b.interference_mw).abs() < 1e-18);
        assert!(b.sinr_db.abs() < 1e-9);
    }

    #[test]
    fn lobe_selection() {
        let tx = Node::frontend(1, 0, [0.0, 0.0, 10.0], 90.0);
        assert!(in_main_lobe(&tx, &Node::ue(2, [0.0, 10.0, 1.5], false)));
        assert!(in_main_lobe(&tx, &Node::ue(2, [5.0, 10.0, 1.5], false)));
        assert!(!in_main_lobe(&tx, &Node::ue(2, [10.0, 0.0, 1.5], false)));
        assert!(!in_main_lobe(&tx, &Node::ue(2, [0.0, -10.0, 1.5], false)));
        let west = Node::frontend(1, 0, [0.0, 0.0, 10.0], 180.0);
        assert!(in_main_lobe(&west, &Node::ue(2, [-10.0, -1.0, 1.5], false)));
    }

    #[test]
    fn los_probability_shape() {
        assert_eq!(los_probability_umi(10.0), 1.0);
        assert!(los_probability_umi(100.0) < los_probability_umi(50.0));
        assert!(los_probability_umi(1000.0) > 0.0);
    }
}
