#![allow(dead_code)]

use iabnet::capacity::default_table;
use iabnet::channel::RadioParams;
use iabnet::energy::PowerModelParams;
use iabnet::graph::{Edge, MeasurementGraph, Node};
use iabnet::instance::{PowerMode, ProblemInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const P_MAX: f64 = 6300.0;

/// Random desk-scale instance: up to 3 units, up to 3 UEs, at most 4
/// frontends, powers on the grid {0, P_max}.
pub fn tiny_instance(seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_units = rng.gen_range(1..=3u32);
    let n_ues = rng.gen_range(1..=3u32);
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut next = 0u32;
    let mut frontends: Vec<(u32, u32)> = Vec::new();
    let mut basebands = Vec::new();
    for u in 0..n_units {
        let pos = [rng.gen_range(0.0..200.0), rng.gen_range(0.0..200.0), 10.0];
        let bb = next;
        next += 1;
        nodes.push(if u == 0 { Node::donor(bb, u, pos) } else { Node::mt_du(bb, u, pos) });
        basebands.push(bb);
        let budget = 4 - frontends.len() as u32 - (n_units - 1 - u);
        let n_f = rng.gen_range(1..=budget.clamp(1, 2));
        for _ in 0..n_f {
            let az = [0.0, 120.0, 240.0][rng.gen_range(0..3)];
            nodes.push(Node::frontend(next, u, pos, az));
            edges.push(Edge::wired(bb, next));
            frontends.push((next, u));
            next += 1;
        }
    }
    for (v, &bb) in basebands.iter().enumerate().skip(1) {
        for &(f, u) in &frontends {
            if u as usize != v && rng.gen_bool(0.6) {
                edges.push(Edge::wireless(f, bb, rng.gen_range(60.0..110.0), rng.gen_bool(0.5)));
            }
        }
    }
    for _ in 0..n_ues {
        let ue = next;
        next += 1;
        nodes.push(Node::ue(ue, [rng.gen_range(0.0..200.0), rng.gen_range(0.0..200.0), 1.5], rng.gen_bool(0.8)));
        let mut any = false;
        for &(f, _) in &frontends {
            if rng.gen_bool(0.7) {
                edges.push(Edge::wireless(f, ue, rng.gen_range(70.0..125.0), rng.gen_bool(0.5)));
                any = true;
            }
        }
        if !any {
            let (f, _) = frontends[rng.gen_range(0..frontends.len())];
            edges.push(Edge::wireless(f, ue, rng.gen_range(70.0..125.0), false));
        }
    }
    let graph = MeasurementGraph::build(nodes, edges).expect("generated graph is valid");
    let demand = rng.gen_range(5.0..400.0);
    let commodities = graph.commodities(demand);
    let radio = RadioParams::default();
    ProblemInstance::new(graph, commodities, radio, default_table(100.0, 4).unwrap(), PowerModelParams::default(), PowerMode::Discrete { levels_mw: vec![0.0, P_MAX] })
        .expect("valid instance")
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}
