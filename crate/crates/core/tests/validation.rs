mod common;

use common::tiny_instance;
use iabnet::energy::total_power;
use iabnet::milp::{solve_problem, HighsBackend, SolverOptions};
use iabnet::oracle::{validate_solution, Rule};
use iabnet::solution::{NetworkSolution, ProblemKind};

fn solved(seed: u64, problem: ProblemKind) -> (iabnet::instance::ProblemInstance, NetworkSolution) {
    let inst = tiny_instance(seed);
    let sol = solve_problem(&inst, problem, &SolverOptions::default(), &HighsBackend).unwrap().solution.unwrap();
    (inst, sol)
}

fn rules(inst: &iabnet::instance::ProblemInstance, sol: &NetworkSolution) -> Vec<Rule> {
    validate_solution(inst, sol).violations.into_iter().map(|v| v.rule).collect()
}

#[test]
fn pipeline_output_passes() {
    for seed in 0..20 {
        for problem in [ProblemKind::Throughput, ProblemKind::Energy] {
            let inst = tiny_instance(seed);
            if let Some(sol) = solve_problem(&inst, problem, &SolverOptions::default(), &HighsBackend).unwrap().solution {
                let r = validate_solution(&inst, &sol);
                assert!(r.ok, "seed {seed} {problem}: {:?}", r.violations);
                let back = NetworkSolution::from_json_str(&sol.to_json_string()).unwrap();
                assert!(validate_solution(&inst, &back).ok);
            }
        }
    }
}

#[test]
fn inflated_airtime_is_caught() {
    let (inst, mut sol) = solved(14, ProblemKind::Throughput);
    for a in &mut sol.airtime {
        a.value = 0.9;
    }
    let r = rules(&inst, &sol);
    assert!(r.contains(&Rule::AirtimeBudget), "{r:?}");
    sol.airtime[0].value = 1.5;
    assert!(rules(&inst, &sol).contains(&Rule::AirtimeRange));
}

#[test]
fn overclaimed_capacity_is_caught() {
    // seed 17 is interference limited, so some link sits below the top step
    let (inst, mut sol) = solved(17, ProblemKind::Throughput);
    let top = inst.table.len() - 1;
    let c = sol.capacities.iter_mut().find(|c| c.level < Some(top)).expect("a link below the top step");
    c.level = Some(top);
    c.capacity_mbps = inst.table.top_capacity();
    assert!(rules(&inst, &sol).contains(&Rule::CapacityOverclaim));
}

#[test]
fn broken_tree_is_caught() {
    let (inst, mut sol) = solved(14, ProblemKind::Throughput);
    let ue_edge = sol.chosen_edges.iter().position(|l| inst.graph.ue_ids().contains(&l.dst)).unwrap();
    sol.chosen_edges.remove(ue_edge);
    let r = rules(&inst, &sol);
    assert!(r.contains(&Rule::Unreached) && r.contains(&Rule::FlowOffTree), "{r:?}");
}

#[test]
fn activation_and_objective_are_checked() {
    let (inst, mut sol) = solved(10, ProblemKind::Energy);
    let mut tampered = sol.clone();
    tampered.objective *= 0.9;
    assert!(rules(&inst, &tampered).contains(&Rule::ObjectiveMismatch));
    let f = sol.frontends.iter_mut().find(|f| f.p_tx_mw > 0.0).unwrap();
    f.active = false;
    assert!(rules(&inst, &sol).contains(&Rule::Activation));
    assert!(total_power(&sol, &inst.power_model).is_err());
}
