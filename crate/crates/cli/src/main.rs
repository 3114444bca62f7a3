mod experiment;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use vrpsa::expand::ArcKind;
use vrpsa::instance::VehicleKind;
use vrpsa::model::{
    build_exact_milp, build_rescheduling_milp, build_resource_allocation_milp, export_lp, ExactOptions,
};
use vrpsa::pipeline::{
    derive_subroutes, hdv_baseline, phase1_routes, rerouting_model, total_cost, FleetMode, Metrics, Recovery, Report,
    Route,
};
use vrpsa::solve::{decode_solution, BuiltinOptions};
use vrpsa::{
    build_instance, expand_graph, load_instance, parse_cvrp, prune_network, save_instance, solve, solve_vrpsa,
    validate, Backend, GenParams, PipelineConfig, RoadType, Solution, SolveStatus, VrpSaInstance,
};

/// Exit codes are a stable contract.
mod code {
    pub const INPUT: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const BACKEND: u8 = 4;
    pub const VALIDATION: u8 = 5;
}

/// Error carrying the process exit code.
#[derive(Debug)]
struct Exit(u8, anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for Exit {
    fn from(e: E) -> Self {
        let e = e.into();
        let c = match e.downcast_ref::<vrpsa::Error>() {
            Some(err) => code_of(err),
            None => code::INPUT,
        };
        Exit(c, e)
    }
}

fn code_of(e: &vrpsa::Error) -> u8 {
    use vrpsa::Error::*;
    match e {
        Infeasible(_) | InfeasibleStsp(_) | FleetExhausted { .. } | Unreachable { .. } | Disconnected(..) => {
            code::INFEASIBLE
        }
        BackendUnavailable(_) | SolverCrash { .. } | ModelTooLarge { .. } | Decode(_) | InvalidModel(_)
        | NameCollision(_) => code::BACKEND,
        ValidationFailed(_) => code::VALIDATION,
        _ => code::INPUT,
    }
}

fn fail(c: u8, msg: impl Into<String>) -> Exit {
    Exit(c, anyhow!(msg.into()))
}

#[derive(Parser)]
#[command(name = "vrpsa", version, about = "Mixed AV/HDV routing under a remote-controller budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an instance from a CVRP benchmark file.
    Gen(GenArgs),
    /// Solve an instance with the pipeline, or the exact model with --exact.
    Solve(SolveArgs),
    /// Validate a solution against its instance.
    Check {
        instance: PathBuf,
        solution: PathBuf,
    },
    /// Write one of the MILP formulations as an LP file.
    Export(ExportArgs),
    /// Run the experiment harness and write CSV tables.
    Bench {
        /// Experiment configuration (JSON).
        config: PathBuf,
        /// Directory for ratios.csv, sweep_bt.csv and sweep_g.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GenArgs {
    /// CVRP benchmark in TSPLIB format.
    input: PathBuf,
    /// Output path; defaults to the input with a .vrpsa.json extension.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Primary grid size in both directions (overridden by --gx/--gy).
    #[arg(long)]
    g: Option<usize>,
    #[arg(long)]
    gx: Option<usize>,
    #[arg(long)]
    gy: Option<usize>,
    #[arg(long)]
    eta1: Option<f64>,
    #[arg(long)]
    eta2: Option<f64>,
    #[arg(long)]
    t_factor: Option<f64>,
    #[arg(long)]
    b_factor: Option<f64>,
    #[arg(long)]
    fixed_cost: Option<f64>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    intervals: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl GenArgs {
    fn params(&self) -> GenParams {
        let d = GenParams::default();
        GenParams {
            gx: self.gx.or(self.g).unwrap_or(d.gx),
            gy: self.gy.or(self.g).unwrap_or(d.gy),
            eta1: self.eta1.unwrap_or(d.eta1),
            eta2: self.eta2.unwrap_or(d.eta2),
            t_factor: self.t_factor.unwrap_or(d.t_factor),
            b_factor: self.b_factor.unwrap_or(d.b_factor),
            fixed_cost: self.fixed_cost.unwrap_or(d.fixed_cost),
            layers: self.layers.unwrap_or(d.layers),
            intervals: self.intervals.unwrap_or(d.intervals),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Builtin,
    External,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "builtin")]
    backend: BackendKind,
    /// Command template for the external backend; defaults to $VRPSA_SOLVER_CMD.
    #[arg(long)]
    solver_cmd: Option<String>,
    /// Seconds per MILP solve.
    #[arg(long, default_value_t = 10.0)]
    time_limit: f64,
}

impl SolverArgs {
    fn backend(&self) -> Result<Backend, Exit> {
        match self.backend {
            BackendKind::Builtin => Ok(Backend::BuiltIn(BuiltinOptions::default())),
            BackendKind::External => {
                let cmd = self.solver_cmd.clone().or_else(|| std::env::var(vrpsa::solve::SOLVER_ENV).ok());
                match cmd {
                    Some(command) if !command.trim().is_empty() => Ok(Backend::External { command }),
                    _ => Err(fail(code::BACKEND, "external backend needs --solver-cmd or VRPSA_SOLVER_CMD")),
                }
            }
        }
    }

    fn time_limit(&self) -> Result<Duration, Exit> {
        Duration::try_from_secs_f64(self.time_limit).map_err(|_| fail(code::INPUT, "invalid --time-limit"))
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// Solution path; defaults to the instance with a .sol.json extension.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Rebuild routes by value (default).
    #[arg(long, overrides_with = "no_priority")]
    priority: bool,
    /// Rebuild routes in seeded random order.
    #[arg(long)]
    no_priority: bool,
    /// Let AV travel times stretch within the edge bounds when rescheduling.
    #[arg(long)]
    flexible: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the controller budget of the instance.
    #[arg(long)]
    budget: Option<usize>,
    /// Solve the time-discretized model directly.
    #[arg(long)]
    exact: bool,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write the step trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the expanded graph in Graphviz format.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Formulation {
    Exact,
    Resource,
    Rescheduling,
    Rerouting,
}

#[derive(Args)]
struct ExportArgs {
    instance: PathBuf,
    #[arg(long, value_enum)]
    formulation: Formulation,
    /// Output path; defaults to stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Flexible AV travel times (exact and rescheduling models).
    #[arg(long)]
    flexible: bool,
    /// Drop the controller budget rows (exact and resource models).
    #[arg(long)]
    no_budget: bool,
    /// Seed of the routing heuristic behind the recovery models.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Solution file: the solution plus the instance it belongs to.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionDoc {
    format_version: u32,
    instance: String,
    fingerprint: String,
    solution: Solution,
}

/// Hash of the routing data: network, depot and customers. Fleet, budget and
/// horizon are left out so that changing them is a validation question.
fn fingerprint(inst: &VrpSaInstance) -> String {
    let data = serde_json::to_string(&(&inst.network, inst.depot, &inst.customers)).expect("instance data serializes");
    let digest = Sha256::digest(data.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn read(path: &Path) -> Result<String, Exit> {
    fs::read_to_string(path).map_err(|e| fail(code::INPUT, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Exit> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load(path: &Path) -> Result<VrpSaInstance, Exit> {
    load_instance(&read(path)?).map_err(|e| fail(code::INPUT, format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.split('.').next().unwrap_or("out").to_string();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn cmd_gen(args: &GenArgs) -> Result<(), Exit> {
    let cvrp = parse_cvrp(&read(&args.input)?).map_err(|e| fail(code::INPUT, format!("{}: {e}", args.input.display())))?;
    let inst = build_instance(&cvrp, &args.params())?;
    let out = args.output.clone().unwrap_or_else(|| with_suffix(&args.input, ".vrpsa.json"));
    write(&out, &save_instance(&inst))?;
    println!(
        "{}: {} nodes, {} edges, {} customers, {} AVs + {} HDVs, budget {}, horizon {:.3}",
        out.display(),
        inst.network.num_nodes(),
        inst.network.num_edges(),
        inst.customers.len(),
        inst.av_count,
        inst.hdv_count,
        inst.budget,
        inst.horizon
    );
    Ok(())
}

/// Budget-free routing cost, as the pipeline's first phase computes it.
fn relaxed_cost(inst: &VrpSaInstance, seed: u64) -> vrpsa::Result<f64> {
    let routes = match phase1_routes(inst, FleetMode::AvOnly, seed) {
        Err(vrpsa::Error::FleetExhausted { .. }) => phase1_routes(inst, FleetMode::Mixed, seed)?,
        r => r?,
    };
    let (rc, fc) = total_cost(inst, &routes);
    Ok(rc + fc)
}

fn solve_exact(inst: &VrpSaInstance, args: &SolveArgs) -> Result<Solution, Exit> {
    let pn = prune_network(&inst.network, &inst.customer_nodes(), inst.depot, inst.eta1, inst.eta2)?;
    let ge = expand_graph(&pn, inst.layers, &inst.customer_nodes(), inst.depot)?;
    if let Some(dot) = &args.dot {
        write(dot, &ge.to_dot())?;
    }
    let opts = ExactOptions {
        flexible_time: args.flexible,
        ..ExactOptions::default()
    };
    let model = build_exact_milp(inst, &ge, &inst.time_grid(), opts);
    let res = solve(&model, &args.solver.backend()?, args.solver.time_limit()?)?;
    match res.status {
        SolveStatus::Infeasible => return Err(fail(code::INFEASIBLE, "exact model is infeasible")),
        s if !s.has_solution() => return Err(fail(code::BACKEND, format!("no solution within the limit ({s:?})"))),
        _ => {}
    }
    let dec = decode_solution(&res, &model, &ge, inst)?;
    let mut routes = Vec::new();
    for r in dec.routes {
        let edges = inst
            .network
            .path_edges(&r.nodes)
            .ok_or_else(|| fail(code::BACKEND, "decoded route leaves the network"))?;
        routes.push(Route {
            vehicle: r.vehicle,
            kind: r.kind,
            customers: r.served,
            nodes: r.nodes,
            edges,
            times: r.times,
        });
    }
    let (routing_cost, fixed_cost) = total_cost(inst, &routes);
    let fleet_mode = if routes.iter().all(|r| r.kind == VehicleKind::Av) {
        FleetMode::AvOnly
    } else if routes.iter().all(|r| r.kind == VehicleKind::Hdv) {
        FleetMode::HdvOnly
    } else {
        FleetMode::Mixed
    };
    Ok(Solution {
        routes,
        unserved: Vec::new(),
        fallback: Vec::new(),
        recovery: Recovery::None,
        fleet_mode,
        flexible: args.flexible,
        priority: false,
        routing_cost,
        fixed_cost,
        metrics: Metrics {
            f1: relaxed_cost(inst, args.seed)?,
            f2: hdv_baseline(inst, args.seed)?,
            fp: routing_cost + fixed_cost,
        },
        trace: Default::default(),
    })
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Exit> {
    let mut inst = load(&args.instance)?;
    if let Some(b) = args.budget {
        inst.budget = b;
    }
    let sol = if args.exact {
        solve_exact(&inst, args)?
    } else {
        if let Some(dot) = &args.dot {
            let pn = prune_network(&inst.network, &inst.customer_nodes(), inst.depot, inst.eta1, inst.eta2)?;
            write(dot, &expand_graph(&pn, inst.layers, &inst.customer_nodes(), inst.depot)?.to_dot())?;
        }
        let cfg = PipelineConfig {
            priority: !args.no_priority,
            flexible: args.flexible,
            seed: args.seed,
            backend: args.solver.backend()?,
            time_limit: args.solver.time_limit()?,
        };
        solve_vrpsa(&inst, &cfg)?
    };
    if let Some(path) = &args.trace {
        write(path, &sol.trace.to_csv()?)?;
    }
    let report = validate(&inst, &sol);
    let doc = SolutionDoc {
        format_version: 1,
        instance: inst.name.clone(),
        fingerprint: fingerprint(&inst),
        solution: sol,
    };
    let out = args.output.clone().unwrap_or_else(|| with_suffix(&args.instance, ".sol.json"));
    write(&out, &(serde_json::to_string_pretty(&doc).context("serializing solution")? + "\n"))?;
    let m = doc.solution.metrics;
    println!("{},{},{},{}", m.f1, m.f2, m.fp, m.fp / m.f1);
    if let Report::Fail(why) = report {
        return Err(fail(code::VALIDATION, format!("solution fails validation: {}", why.join("; "))));
    }
    Ok(())
}

fn cmd_check(instance: &Path, solution: &Path) -> Result<(), Exit> {
    let inst = load(instance)?;
    let doc: SolutionDoc = serde_json::from_str(&read(solution)?)
        .map_err(|e| fail(code::INPUT, format!("{}: {e}", solution.display())))?;
    if doc.fingerprint != fingerprint(&inst) {
        return Err(fail(
            code::INPUT,
            format!("{} was solved for a different instance ({})", solution.display(), doc.instance),
        ));
    }
    match validate(&inst, &doc.solution) {
        Report::Pass => {
            println!("PASS");
            Ok(())
        }
        Report::Fail(why) => {
            for w in &why {
                println!("FAIL {w}");
            }
            Err(fail(code::VALIDATION, format!("{} check(s) failed", why.len())))
        }
    }
}

/// The pairwise resource model grows with the square of the ordinary arcs.
const MAX_ARC_PAIRS: usize = 1_000_000;

fn cmd_export(args: &ExportArgs) -> Result<(), Exit> {
    let inst = load(&args.instance)?;
    let customers = inst.customer_nodes();
    let opts = ExactOptions {
        flexible_time: args.flexible,
        budget: !args.no_budget,
        ..ExactOptions::default()
    };
    let expanded = || -> Result<_, Exit> {
        let pn = prune_network(&inst.network, &customers, inst.depot, inst.eta1, inst.eta2)?;
        Ok(expand_graph(&pn, inst.layers, &customers, inst.depot)?)
    };
    let av_routes = || -> Result<Vec<Route>, Exit> {
        let routes = phase1_routes(&inst, FleetMode::AvOnly, args.seed)?;
        Ok(routes.into_iter().filter(|r| r.kind == VehicleKind::Av).collect())
    };
    let model = match args.formulation {
        Formulation::Exact => build_exact_milp(&inst, &expanded()?, &inst.time_grid(), opts),
        Formulation::Resource => {
            let ge = expanded()?;
            let ordinary = ge
                .arcs()
                .iter()
                .filter(|a| matches!(a.kind, ArcKind::Road { edge } if inst.network.edge(edge).road == RoadType::Ordinary))
                .count();
            let pairs = inst.av_count * inst.av_count.saturating_sub(1) * ordinary * ordinary;
            if opts.budget && pairs > MAX_ARC_PAIRS {
                return Err(fail(
                    code::BACKEND,
                    format!("resource model needs {pairs} arc pairs (limit {MAX_ARC_PAIRS}); use a smaller instance"),
                ));
            }
            build_resource_allocation_milp(&inst, &ge, opts)
        }
        Formulation::Rescheduling => {
            let subs: Vec<_> = av_routes()?.iter().map(|r| derive_subroutes(r, &inst.network)).collect();
            build_rescheduling_milp(&subs, inst.budget, inst.horizon, args.flexible)
        }
        Formulation::Rerouting => {
            // rebuild the last route around all the others
            let mut routes = av_routes()?;
            let last = routes.pop().ok_or_else(|| fail(code::INPUT, "instance has no AV route to rebuild"))?;
            rerouting_model(&inst, &last, &routes)?.1
        }
    };
    let text = export_lp(&model)?;
    match &args.output {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Exit> {
    match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Solve(args) => cmd_solve(&args),
        Command::Check { instance, solution } => cmd_check(&instance, &solution),
        Command::Export(args) => cmd_export(&args),
        Command::Bench { config, out } => experiment::cmd_bench(&config, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { code::INPUT } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit(c, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(c)
        }
    }
}
