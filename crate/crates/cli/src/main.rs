use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use iabnet::energy::total_power;
use iabnet::graph::{MeasurementGraph, NodeId};
use iabnet::heuristics::{
    local_search_energy, local_search_throughput, read_trace_csv, selective_reduction, LocalSearchOptions, PruneParams, SearchState,
};
use iabnet::instance::{PowerMode, ProblemInstance};
use iabnet::milp::{solve_problem, HighsBackend, SolveStatus, SolverOptions};
use iabnet::oracle::validate_solution;
use iabnet::report::{evolution_stats, read_results_csv, summarize, write_cdf_csv, write_results_csv, Method, RunRecord};
use iabnet::scenario::{generate, load_profile_csv, LoadProfile, ScenarioConfig};
use iabnet::solution::{NetworkSolution, ProblemKind, SolutionStatus};

#[derive(Parser)]
#[command(name = "iabnet", version, about = "Topology, power and energy optimization for IAB networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the measurement graph of one hour.
    ScenarioGen(ScenarioGenArgs),
    /// Solve one problem on one hour with one method.
    Solve(SolveArgs),
    /// Run methods and problems over many hours.
    Sweep(SweepArgs),
    /// Summarize a results CSV into plot-ready CSVs.
    Report(ReportArgs),
    /// Check a solution against its graph.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario config (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Load profile CSV with columns hour,p. Full load when omitted.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<(ScenarioConfig, LoadProfile)> {
        let mut config = match &self.config {
            Some(p) => ScenarioConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            config.seed = s;
        }
        let profile = match &self.profile {
            Some(p) => load_profile_csv(p).with_context(|| format!("reading {}", p.display()))?,
            None => LoadProfile::constant(1.0)?,
        };
        Ok((config, profile))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PowerArg {
    /// Every frontend at P_max when on.
    Fixed,
    /// Uniform grid with `--power-steps` steps.
    Grid,
    /// Any power in [0, P_max]; throughput only.
    Continuous,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "grid")]
    power: PowerArg,
    #[arg(long, default_value_t = 1)]
    power_steps: usize,
    /// Per-solve time limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Wall-clock budget of one local search in seconds.
    #[arg(long, default_value_t = 2400.0)]
    global_time_limit: f64,
    #[arg(long, default_value_t = 5)]
    k0: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    #[arg(long, default_value_t = 1)]
    k_step: usize,
    /// Solver threads per run.
    #[arg(long, default_value_t = 1)]
    threads: u32,
}

impl SolverArgs {
    fn power_mode(&self, frontends: &[NodeId], p_max_mw: f64) -> Result<PowerMode> {
        Ok(match self.power {
            PowerArg::Fixed => PowerMode::all_at(frontends, p_max_mw),
            PowerArg::Continuous => PowerMode::Continuous,
            PowerArg::Grid if self.power_steps == 0 => bail!("--power-steps must be at least 1"),
            PowerArg::Grid => PowerMode::grid(p_max_mw, self.power_steps),
        })
    }

    fn solver(&self, seed: u64) -> SolverOptions {
        SolverOptions { time_limit_s: self.time_limit, threads: self.threads, seed: seed as u32, ..SolverOptions::default() }
    }

    fn prune(&self) -> PruneParams {
        PruneParams { k0: self.k0, k_max: self.k_max, step: self.k_step }
    }
}

#[derive(Args)]
struct ScenarioGenArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    hour: u32,
    /// Output graph JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    hour: u32,
    /// Solve on this graph instead of generating one.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    method: Method,
    #[arg(long)]
    problem: ProblemKind,
    /// Output solution JSON.
    #[arg(long)]
    out: PathBuf,
    /// Accepted-objective trace of a local search (CSV).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Hours to run, e.g. `0-23` or `0,6,12`. All profile hours when omitted.
    #[arg(long)]
    hours: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "local-search,selective-reduction")]
    methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "throughput,energy")]
    problems: Vec<ProblemKind>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Parallel hour workers.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Leave the runtime column empty so reruns are byte-identical.
    #[arg(long)]
    omit_runtime: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    results: PathBuf,
    /// Directory of local-search traces; defaults to `traces` next to the results.
    #[arg(long)]
    traces: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    graph: PathBuf,
    /// Scenario config supplying radio, power model and demand.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Failure classes that map to exit codes.
enum Failure {
    Invalid,
    Input(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ScenarioGen(a) => scenario_gen(&a).map_err(Failure::from),
        Command::Solve(a) => solve_cmd(&a).map_err(Failure::from),
        Command::Sweep(a) => sweep(&a).map_err(Failure::from),
        Command::Report(a) => report(&a).map_err(Failure::from),
        Command::Validate(a) => validate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid) => ExitCode::from(1),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn scenario_gen(a: &ScenarioGenArgs) -> Result<()> {
    let (config, profile) = a.scenario.load()?;
    let sc = generate(&config, &profile, a.hour)?;
    sc.graph.save(&a.out)?;
    println!(
        "hour {}: {} nodes, {} edges, {} commodities, {} UEs dropped",
        a.hour,
        sc.graph.nodes().len(),
        sc.graph.edges().len(),
        sc.commodities.len(),
        sc.dropped_ues.len()
    );
    Ok(())
}

fn build_instance(config: &ScenarioConfig, graph: MeasurementGraph, solver: &SolverArgs) -> Result<ProblemInstance> {
    let commodities = graph.commodities(config.demand_mbps);
    let frontends = graph.frontend_ids();
    let mode = solver.power_mode(&frontends, config.radio.p_max_mw)?;
    let table = iabnet::capacity::default_table(config.radio.bandwidth_mhz, config.radio.mimo_layers)?;
    Ok(ProblemInstance::new(graph, commodities, config.radio.clone(), table, config.power_model.clone(), mode)?)
}

struct RunOutput {
    record: RunRecord,
    solution: Option<NetworkSolution>,
    trace: Option<SearchState>,
}

fn run_one(instance: &ProblemInstance, hour: u32, method: Method, problem: ProblemKind, args: &SolverArgs, seed: u64) -> RunOutput {
    let solver = args.solver(seed);
    let start = Instant::now();
    let result: Result<(NetworkSolution, Option<SearchState>), String> = match method {
        Method::LocalSearch => {
            let opts = LocalSearchOptions { solver, global_time_limit_s: args.global_time_limit };
            let out = match problem {
                ProblemKind::Throughput => local_search_throughput(instance, &opts, &HighsBackend),
                ProblemKind::Energy => local_search_energy(instance, &opts, &HighsBackend),
            };
            out.map(|o| (o.solution, Some(o.state))).map_err(|e| e.to_string())
        }
        Method::SelectiveReduction => {
            selective_reduction(instance, &args.prune(), problem, &solver, &HighsBackend).map(|o| (o.solution, None)).map_err(|e| e.to_string())
        }
        Method::Exact => match solve_problem(instance, problem, &solver, &HighsBackend) {
            Ok(out) => match out.solution {
                Some(s) => Ok((s, None)),
                None if out.status == SolveStatus::Infeasible => Err("infeasible".into()),
                None => Err("no solution within time limit".into()),
            },
            Err(e) => Err(e.to_string()),
        },
    };
    let runtime = start.elapsed().as_secs_f64();
    match result {
        Ok((mut sol, trace)) => {
            if method != Method::Exact {
                sol.status = SolutionStatus::Heuristic;
            }
            if sol.p_total_w.is_none() {
                sol.p_total_w = total_power(&sol, &instance.power_model).ok().map(|r| r.total_w);
            }
            RunOutput { record: RunRecord::from_solution(hour, method, &sol, runtime), solution: Some(sol), trace }
        }
        Err(msg) => RunOutput { record: RunRecord::failure(hour, method, problem, format!("failed: {msg}"), runtime), solution: None, trace: None },
    }
}

fn solve_cmd(a: &SolveArgs) -> Result<()> {
    let (config, profile) = a.scenario.load()?;
    let graph = match &a.graph {
        Some(p) => MeasurementGraph::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => generate(&config, &profile, a.hour)?.graph,
    };
    let instance = build_instance(&config, graph, &a.solver)?;
    let out = run_one(&instance, a.hour, a.method, a.problem, &a.solver, config.seed);
    let Some(sol) = out.solution else { bail!("{}", out.record.status) };
    sol.save(&a.out)?;
    if let (Some(path), Some(state)) = (&a.trace, &out.trace) {
        state.write_trace_csv(File::create(path)?)?;
    }
    let r = &out.record;
    println!(
        "{} {} hour {}: objective {:.6}, {} frontends active, {:.3} s",
        r.method,
        r.problem,
        r.hour,
        sol.objective,
        sol.active_count(),
        r.runtime_s.unwrap_or(0.0)
    );
    Ok(())
}

fn parse_hours(list: &str) -> Result<Vec<u32>> {
    let mut hours = Vec::new();
    for part in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match part.split_once('-') {
            Some((lo, hi)) => {
                let (lo, hi): (u32, u32) = (lo.parse()?, hi.parse()?);
                if lo > hi {
                    bail!("empty hour range {part}");
                }
                hours.extend(lo..=hi);
            }
            None => hours.push(part.parse()?),
        }
    }
    hours.sort_unstable();
    hours.dedup();
    Ok(hours)
}

fn run_name(hour: u32, method: Method, problem: ProblemKind) -> String {
    format!("h{hour:03}_{method}_{problem}")
}

fn sweep(a: &SweepArgs) -> Result<()> {
    if a.scenario.seed.is_none() {
        bail!("sweep needs an explicit --seed");
    }
    let (config, profile) = a.scenario.load()?;
    config.validate()?;
    let hours = match &a.hours {
        Some(s) => parse_hours(s)?,
        None => profile.hours().collect(),
    };
    if let Some(h) = hours.iter().find(|&&h| profile.get(h).is_none()) {
        bail!("hour {h} is not in the load profile");
    }
    let solutions = a.out_dir.join("solutions");
    let traces = a.out_dir.join("traces");
    fs::create_dir_all(&solutions)?;
    fs::create_dir_all(&traces)?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.workers.max(1)).build()?;
    let per_hour: Vec<Vec<(String, RunOutput)>> = pool.install(|| {
        hours
            .par_iter()
            .map(|&hour| {
                let instance = generate(&config, &profile, hour).map_err(anyhow::Error::from).and_then(|sc| build_instance(&config, sc.graph, &a.solver));
                let mut runs = Vec::new();
                for &method in &a.methods {
                    for &problem in &a.problems {
                        let out = match &instance {
                            Ok(inst) => run_one(inst, hour, method, problem, &a.solver, config.seed),
                            Err(e) => RunOutput { record: RunRecord::failure(hour, method, problem, format!("failed: {e}"), 0.0), solution: None, trace: None },
                        };
                        runs.push((run_name(hour, method, problem), out));
                    }
                }
                runs
            })
            .collect()
    });

    let mut records = Vec::new();
    for (name, out) in per_hour.into_iter().flatten() {
        if let Some(sol) = &out.solution {
            sol.save(solutions.join(format!("{name}.json")))?;
        }
        if let Some(state) = &out.trace {
            state.write_trace_csv(File::create(traces.join(format!("{name}.csv")))?)?;
        }
        let mut r = out.record;
        if a.omit_runtime {
            r.runtime_s = None;
        }
        records.push(r);
    }
    records.sort_by_key(RunRecord::sort_key);
    let path = a.out_dir.join("results.csv");
    write_results_csv(&records, File::create(&path)?)?;
    let failed = records.iter().filter(|r| r.objective.is_none()).count();
    println!("{} runs over {} hours, {failed} failed; results in {}", records.len(), hours.len(), path.display());
    Ok(())
}

/// Parses `h007_local-search_throughput` back into its key.
fn parse_run_name(stem: &str) -> Option<(u32, Method, ProblemKind)> {
    let rest = stem.strip_prefix('h')?;
    let (hour, rest) = rest.split_once('_')?;
    let (method, problem) = rest.rsplit_once('_')?;
    Some((hour.parse().ok()?, method.parse().ok()?, problem.parse().ok()?))
}

fn report(a: &ReportArgs) -> Result<()> {
    let records = read_results_csv(File::open(&a.results).with_context(|| format!("reading {}", a.results.display()))?)?;
    let summary = summarize(&records)?;
    fs::create_dir_all(&a.out_dir)?;
    write_cdf_csv(&summary.throughput_cdf, "min_ue_mbps", File::create(a.out_dir.join("throughput_cdf.csv"))?)?;
    write_cdf_csv(&summary.eta_cdf, "eta_mbps_per_w", File::create(a.out_dir.join("eta_cdf.csv"))?)?;
    let mut w = csv::Writer::from_path(a.out_dir.join("activations.csv"))?;
    for p in &summary.activations {
        w.serialize(p)?;
    }
    if summary.activations.is_empty() {
        w.write_record(["hour", "method", "problem", "activated_frontends"])?;
    }
    w.flush()?;

    let traces = a.traces.clone().unwrap_or_else(|| a.results.parent().unwrap_or(Path::new(".")).join("traces"));
    let mut rows = Vec::new();
    if traces.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(&traces)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "csv")).collect();
        paths.sort();
        for p in paths {
            let Some((hour, method, problem)) = p.file_stem().and_then(|s| s.to_str()).and_then(parse_run_name) else { continue };
            let log = read_trace_csv(File::open(&p)?).with_context(|| format!("reading {}", p.display()))?;
            if let Some(s) = evolution_stats(&log, problem == ProblemKind::Throughput) {
                rows.push((hour, method, problem, s));
            }
        }
    }
    let mut w = csv::Writer::from_path(a.out_dir.join("evolution.csv"))?;
    w.write_record(["hour", "method", "problem", "initial", "final", "improvement_pct", "time_to_near_final_s", "total_time_s"])?;
    for (hour, method, problem, s) in &rows {
        w.write_record([
            hour.to_string(),
            method.to_string(),
            problem.to_string(),
            s.initial.to_string(),
            s.final_.to_string(),
            s.improvement_pct.to_string(),
            s.time_to_near_final_s.map_or(String::new(), |t| t.to_string()),
            s.total_time_s.to_string(),
        ])?;
    }
    w.flush()?;
    println!("{} rows summarized, {} traces; outputs in {}", records.len(), rows.len(), a.out_dir.display());
    Ok(())
}

fn validate(a: &ValidateArgs) -> Result<(), Failure> {
    let graph = MeasurementGraph::load(&a.graph).with_context(|| format!("reading {}", a.graph.display()))?;
    let text = fs::read_to_string(&a.solution).with_context(|| format!("reading {}", a.solution.display()))?;
    let sol = NetworkSolution::from_json_str(&text).with_context(|| format!("parsing {}", a.solution.display()))?;
    let unknown: Vec<String> = sol
        .frontends
        .iter()
        .map(|f| f.id)
        .chain(sol.ue_rates.iter().map(|r| r.ue))
        .chain(sol.chosen_edges.iter().flat_map(|l| [l.src, l.dst]))
        .filter(|id| !graph.contains(*id))
        .map(|id| id.to_string())
        .collect();
    if !unknown.is_empty() {
        return Err(Failure::Input(anyhow::anyhow!("solution refers to nodes missing from the graph: {}", unknown.join(", "))));
    }
    let config = match &a.config {
        Some(p) => ScenarioConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ScenarioConfig::default(),
    };
    let commodities = graph.commodities(config.demand_mbps);
    let table = iabnet::capacity::default_table(config.radio.bandwidth_mhz, config.radio.mimo_layers).map_err(anyhow::Error::from)?;
    let instance =
        ProblemInstance::new(graph, commodities, config.radio.clone(), table, config.power_model.clone(), PowerMode::Continuous).map_err(anyhow::Error::from)?;
    let report = validate_solution(&instance, &sol);
    if report.ok {
        println!("ok");
        return Ok(());
    }
    for v in &report.violations {
        println!("{:?} at {}: {}", v.rule, v.location, v.magnitude);
    }
    Err(Failure::Invalid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hour_lists() {
        assert_eq!(parse_hours("0-3,2,7").unwrap(), vec![0, 1, 2, 3, 7]);
        assert!(parse_hours("5-2").is_err());
        assert!(parse_hours("x").is_err());
    }

    #[test]
    fn run_names_round_trip() {
        let name = run_name(7, Method::SelectiveReduction, ProblemKind::Energy);
        assert_eq!(name, "h007_selective-reduction_energy");
        assert_eq!(parse_run_name(&name), Some((7, Method::SelectiveReduction, ProblemKind::Energy)));
    }
}
