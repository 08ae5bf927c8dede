use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::graph::NodeId;
use crate::instance::{discrete_domain, PowerDomain, PowerMode, ProblemInstance};
use crate::milp::{solve_with_domains, MilpBackend, SolveOutcome, SolverOptions};
use crate::solution::{NetworkSolution, ProblemKind};

use super::{HeuristicError, SearchState};

/// Objective improvements smaller than this are not accepted.
pub const IMPROVEMENT_TOL: f64 = 1e-6;
/// Steps of the grid used by the energy refinement when the instance has no grid.
pub const DEFAULT_GRID_STEPS: usize = 8;

#[derive(Debug, Clone)]
pub struct LocalSearchOptions {
    /// Settings of every model solve; `time_limit_s` is the per-iteration limit.
    pub solver: SolverOptions,
    pub global_time_limit_s: f64,
}

impl Default for LocalSearchOptions {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), global_time_limit_s: 2400.0 }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub solution: NetworkSolution,
    pub state: SearchState,
}

struct Runner<'a> {
    instance: &'a ProblemInstance,
    options: &'a LocalSearchOptions,
    backend: &'a dyn MilpBackend,
    start: Instant,
    state: SearchState,
}

impl Runner<'_> {
    fn out_of_time(&self) -> bool {
        self.start.elapsed().as_secs_f64() >= self.options.global_time_limit_s
    }

    fn run(&mut self, problem: ProblemKind, domains: &BTreeMap<NodeId, PowerDomain>) -> Result<SolveOutcome, HeuristicError> {
        self.state.evaluations += 1;
        Ok(solve_with_domains(self.instance, problem, domains, &self.options.solver, self.backend)?)
    }

    fn fixed(&mut self, powers: &BTreeMap<NodeId, f64>) -> Result<Option<NetworkSolution>, HeuristicError> {
        let domains = powers.iter().map(|(&f, &p)| (f, PowerDomain::Const(p))).collect();
        Ok(self.run(ProblemKind::Throughput, &domains)?.solution)
    }

    fn accept(&mut self, powers: BTreeMap<NodeId, f64>, objective: f64) {
        self.state.prev_best_obj = self.state.curr_best_obj;
        self.state.curr_best_obj = objective;
        self.state.curr_best_sol = powers;
        let t = self.start.elapsed().as_secs_f64();
        self.state.record(t, objective);
    }
}

fn phase2_domain(instance: &ProblemInstance) -> PowerDomain {
    match &instance.power_mode {
        PowerMode::Discrete { levels_mw } => discrete_domain(levels_mw),
        _ => PowerDomain::Continuous { max_mw: instance.radio.p_max_mw },
    }
}

fn toggled(powers: &BTreeMap<NodeId, f64>, f: NodeId, p_max: f64) -> BTreeMap<NodeId, f64> {
    let mut c = powers.clone();
    let p = c.get_mut(&f).expect("frontend in power map");
    *p = if *p > 0.0 { 0.0 } else { p_max };
    c
}

fn on_pattern(powers: &BTreeMap<NodeId, f64>) -> Vec<bool> {
    powers.values().map(|&p| p > 0.0).collect()
}

/// Max-min throughput by on/off toggling followed by one-frontend power moves.
pub fn local_search_throughput(instance: &ProblemInstance, options: &LocalSearchOptions, backend: &dyn MilpBackend) -> Result<SearchOutcome, HeuristicError> {
    let mut r = Runner { instance, options, backend, start: Instant::now(), state: SearchState::default() };
    let p_max = instance.radio.p_max_mw;
    let frontends = instance.frontends();
    let mut powers: BTreeMap<NodeId, f64> = frontends.iter().map(|&f| (f, p_max)).collect();
    let start = r.fixed(&powers)?.ok_or(HeuristicError::NoFeasibleStart)?;
    r.accept(powers.clone(), start.objective);
    r.state.prev_best_obj = start.objective;

    // Phase 1: ties are accepted, but only towards patterns not seen before.
    let mut visited: BTreeSet<Vec<bool>> = BTreeSet::new();
    visited.insert(on_pattern(&powers));
    loop {
        let mut moved = false;
        for &f in &frontends {
            if r.out_of_time() {
                break;
            }
            let cand = toggled(&powers, f, p_max);
            if !visited.insert(on_pattern(&cand)) {
                continue;
            }
            if let Some(sol) = r.fixed(&cand)? {
                if sol.objective >= r.state.curr_best_obj {
                    powers = cand;
                    r.accept(powers.clone(), sol.objective);
                    moved = true;
                }
            }
        }
        if !moved || r.out_of_time() {
            break;
        }
    }
    r.state.phase1_powers = powers.clone();
    r.state.phase1_objective = r.state.curr_best_obj;

    // Phase 2: free one frontend at a time, keep strict improvements.
    let free = phase2_domain(instance);
    loop {
        let mut moved = false;
        for &f in &frontends {
            if r.out_of_time() {
                break;
            }
            let mut domains: BTreeMap<NodeId, PowerDomain> = powers.iter().map(|(&g, &p)| (g, PowerDomain::Const(p))).collect();
            domains.insert(f, free.clone());
            let Some(sol) = r.run(ProblemKind::Throughput, &domains)?.solution else { continue };
            if sol.objective <= r.state.curr_best_obj + IMPROVEMENT_TOL {
                continue;
            }
            let mut cand = powers.clone();
            cand.insert(f, sol.powers_mw()[&f]);
            // confirm at the fixed power so the incumbent never rests on solver slack
            if let Some(fixed) = r.fixed(&cand)? {
                if fixed.objective > r.state.curr_best_obj + IMPROVEMENT_TOL {
                    powers = cand;
                    r.accept(powers.clone(), fixed.objective);
                    moved = true;
                }
            }
        }
        if !moved || r.out_of_time() {
            break;
        }
    }

    let solution = r.fixed(&powers)?.ok_or_else(|| HeuristicError::BadParams("incumbent powers became infeasible".into()))?;
    Ok(SearchOutcome { solution, state: r.state })
}

/// Checks that no single toggle between 0 and P_max improves the max-min
/// rate of `powers` by more than the acceptance tolerance.
pub fn phase1_certificate(
    instance: &ProblemInstance,
    powers: &BTreeMap<NodeId, f64>,
    objective: f64,
    solver: &SolverOptions,
    backend: &dyn MilpBackend,
) -> Result<bool, HeuristicError> {
    let p_max = instance.radio.p_max_mw;
    for &f in powers.keys() {
        let cand = toggled(powers, f, p_max);
        let domains = cand.iter().map(|(&g, &p)| (g, PowerDomain::Const(p))).collect();
        let out = solve_with_domains(instance, ProblemKind::Throughput, &domains, solver, backend)?;
        if let Some(z) = out.objective() {
            if z > objective * (1.0 + IMPROVEMENT_TOL) + IMPROVEMENT_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn refinement_levels(instance: &ProblemInstance) -> Vec<f64> {
    let levels = match &instance.power_mode {
        PowerMode::Discrete { levels_mw } => levels_mw.clone(),
        _ => match PowerMode::grid(instance.radio.p_max_mw, DEFAULT_GRID_STEPS) {
            PowerMode::Discrete { levels_mw } => levels_mw,
            _ => unreachable!(),
        },
    };
    levels.into_iter().filter(|&l| l > 0.0).collect()
}

fn fixed_energy_domain(p: f64) -> PowerDomain {
    if p > 0.0 {
        PowerDomain::Levels { levels_mw: vec![p], allow_off: true }
    } else {
        PowerDomain::Const(0.0)
    }
}

/// Minimum energy: powers from the throughput search, then one-frontend
/// refinement over the power grid keeping strict decreases.
pub fn local_search_energy(instance: &ProblemInstance, options: &LocalSearchOptions, backend: &dyn MilpBackend) -> Result<SearchOutcome, HeuristicError> {
    let start = Instant::now();
    let thr = local_search_throughput(instance, options, backend)?;
    let z = thr.state.curr_best_obj;
    if let Some(k) = instance.commodities.iter().find(|k| k.demand_mbps >= z) {
        return Err(HeuristicError::DemandExceedsMaxMin { demand: k.demand_mbps, max_min: z });
    }
    let mut r = Runner { instance, options, backend, start, state: SearchState { evaluations: thr.state.evaluations, ..SearchState::default() } };
    r.state.phase1_powers = thr.state.phase1_powers.clone();
    r.state.phase1_objective = thr.state.phase1_objective;

    let domains: BTreeMap<NodeId, PowerDomain> = thr.state.curr_best_sol.iter().map(|(&f, &p)| (f, fixed_energy_domain(p))).collect();
    let mut best = r
        .run(ProblemKind::Energy, &domains)?
        .solution
        .ok_or_else(|| HeuristicError::BadParams("energy model infeasible at the throughput powers".into()))?;
    r.accept(best.powers_mw(), best.objective);
    r.state.prev_best_obj = best.objective;

    let levels = refinement_levels(instance);
    let frontends = instance.frontends();
    loop {
        let mut moved = false;
        for &f in &frontends {
            if r.out_of_time() {
                break;
            }
            let current = best.powers_mw();
            let mut domains: BTreeMap<NodeId, PowerDomain> = current.iter().map(|(&g, &p)| (g, fixed_energy_domain(p))).collect();
            let mut own = levels.clone();
            if current[&f] > 0.0 && !own.contains(&current[&f]) {
                own.push(current[&f]);
                own.sort_by(f64::total_cmp);
            }
            domains.insert(f, PowerDomain::Levels { levels_mw: own, allow_off: true });
            let Some(sol) = r.run(ProblemKind::Energy, &domains)?.solution else { continue };
            if sol.objective < r.state.curr_best_obj - IMPROVEMENT_TOL {
                r.accept(sol.powers_mw(), sol.objective);
                best = sol;
                moved = true;
            }
        }
        if !moved || r.out_of_time() {
            break;
        }
    }
    Ok(SearchOutcome { solution: best, state: r.state })
}
