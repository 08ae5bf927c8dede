use iabnet::graph::NodeKind;
use iabnet::scenario::{generate, ue_density, LoadProfile, ScenarioConfig};

#[test]
fn same_seed_same_bytes() {
    let cfg = ScenarioConfig { seed: 11, ..ScenarioConfig::default() };
    let p = LoadProfile::constant(0.7).unwrap();
    let a = generate(&cfg, &p, 5).unwrap().graph.to_json_string();
    let b = generate(&cfg, &p, 5).unwrap().graph.to_json_string();
    assert_eq!(a, b);
    let c = generate(&ScenarioConfig { seed: 12, ..cfg }, &p, 5).unwrap().graph.to_json_string();
    assert_ne!(a, c);
}

#[test]
fn doubling_load_doubles_ue_count() {
    let half = LoadProfile::constant(0.25).unwrap();
    let full = LoadProfile::constant(0.5).unwrap();
    let (mut a, mut b) = (0usize, 0usize);
    for seed in 0..100 {
        // a huge cutoff keeps every sampled UE so the count is the sampled one
        let cfg = ScenarioConfig { seed, coupling_cutoff_db: 1e9, ..ScenarioConfig::default() };
        let sa = generate(&cfg, &half, 0).unwrap();
        let sb = generate(&cfg, &full, 0).unwrap();
        a += sa.graph.ue_ids().len() + sa.dropped_ues.len();
        b += sb.graph.ue_ids().len() + sb.dropped_ues.len();
    }
    let ratio = b as f64 / a as f64;
    assert!((ratio - 2.0).abs() <= 0.2, "{ratio}");
}

#[test]
fn indoor_fraction_near_target() {
    let cfg = ScenarioConfig { seed: 3, area_km2: 1.0, lambda_gnb: 10.0, coupling_cutoff_db: 1e9, ..ScenarioConfig::default() };
    let p = LoadProfile::constant(1.0).unwrap();
    let s = generate(&cfg, &p, 0).unwrap();
    let ues: Vec<_> = s.graph.nodes_of(NodeKind::Ue).collect();
    assert!(ues.len() >= 100 && s.dropped_ues.is_empty());
    let mut indoor = 0;
    let mut total = 0;
    for seed in 0..10 {
        let s = generate(&ScenarioConfig { seed, ..cfg.clone() }, &p, 0).unwrap();
        for n in s.graph.nodes_of(NodeKind::Ue) {
            total += 1;
            indoor += usize::from(n.indoor);
        }
    }
    assert!(total >= 1000);
    let frac = indoor as f64 / total as f64;
    assert!((frac - 0.8).abs() <= 0.03, "{frac}");
}

#[test]
fn peak_density_stays_in_band() {
    let p = LoadProfile::constant(1.0).unwrap();
    for lambda in [1.0, 18.0, 90.0] {
        let cfg = ScenarioConfig { lambda_gnb: lambda, ..ScenarioConfig::default() };
        let d = ue_density(&p, 0, &cfg).unwrap();
        assert!((0.0..=900.0).contains(&d));
    }
}

#[test]
fn generated_graphs_are_valid_and_sectorized() {
    let cfg = ScenarioConfig { seed: 1, ..ScenarioConfig::default() };
    let p = LoadProfile::constant(0.3).unwrap();
    for t in 0..5 {
        let s = generate(&cfg, &p, t).unwrap();
        for n in s.graph.nodes_of(NodeKind::Ue) {
            assert!(s.graph.in_degree(n.id) >= 1);
        }
        let azimuths: Vec<f64> = s.graph.nodes_of(NodeKind::Frontend).take(3).map(|n| n.sector_azimuth_deg.unwrap()).collect();
        assert_eq!(azimuths, vec![0.0, 120.0, 240.0]);
        assert_eq!(s.commodities.len(), s.graph.ue_ids().len());
    }
}
