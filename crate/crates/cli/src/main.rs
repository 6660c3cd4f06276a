//! `netslice`: generate instances, solve them, run batch experiments and
//! verify solution files.
//!
//! Exit codes: 0 optimal or feasible, 2 infeasible, 3 iteration, node or
//! time limit, 1 any other error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use netslice_core::instance::{self, examples};
use netslice_core::lp::write_lp_format;
use netslice_core::reachability::analyze;
use netslice_core::solution::{solution_from_json, solution_to_json};
use netslice_core::{
    brute_force_ns, build_fp, build_ns, gap_improvement, run_experiment, solve_cbd, solve_direct,
    solve_lp_dynamic_rounding, solve_lp_one_shot_rounding, verify, write_trace_csv,
    BaselineOutcome, BaselineResult, CbdConfig, CbdStatus, ExperimentConfig, FpVariant,
    GeneratorConfig, Instance, LpConfig, MilpConfig, NsSolution, OracleResult,
};

#[derive(Parser)]
#[command(
    name = "netslice",
    version,
    about = "Service chain placement and routing solvers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance (or a built-in example) as JSON.
    Gen(GenArgs),
    /// Solve an instance.
    Solve(SolveArgs),
    /// Run a batch experiment described by a TOML file.
    Experiment(ExperimentArgs),
    /// Check a solution file against an instance.
    Verify(VerifyArgs),
    /// Write a model of an instance in CPLEX LP format.
    ExportLp(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Example {
    Chain,
    Diamond,
}

#[derive(clap::Args)]
struct GenArgs {
    /// Generator settings in TOML; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Emit a built-in example instead of a random instance.
    #[arg(long, conflicts_with = "config")]
    example: Option<Example>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    clouds: Option<usize>,
    #[arg(long)]
    services: Option<usize>,
    #[arg(long)]
    chain_length: Option<usize>,
    /// Make every link capacity infinite.
    #[arg(long)]
    infinite_links: bool,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Alg {
    Cbd,
    Direct,
    Lpor,
    Lpdr,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Fp,
    Fp1,
    Fp2,
}

impl From<Variant> for FpVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Fp => FpVariant::Fp,
            Variant::Fp1 => FpVariant::FpI,
            Variant::Fp2 => FpVariant::FpII,
        }
    }
}

#[derive(clap::Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "cbd")]
    alg: Alg,
    /// Master problem used by the decomposition.
    #[arg(long, value_enum, default_value = "fp2")]
    variant: Variant,
    /// Maximum number of master solves (at least 1); unlimited by default.
    #[arg(long, value_parser = parse_iter_max)]
    iter_max: Option<usize>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Also compute the gap-improvement metric.
    #[arg(long)]
    gap: bool,
    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the per-iteration decomposition trace as CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the solution as JSON here.
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    config: PathBuf,
    /// Directory for the CSV files.
    #[arg(short, long, default_value = "results")]
    out: PathBuf,
    /// Override the worker count from the config.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(clap::Args)]
struct VerifyArgs {
    instance: PathBuf,
    solution: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Ns,
    Fp,
    Fp1,
    Fp2,
}

#[derive(clap::Args)]
struct ExportArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "ns")]
    model: ModelKind,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Report {
    algorithm: &'static str,
    variant: Option<&'static str>,
    status: String,
    objective: Option<f64>,
    iterations: Option<usize>,
    cuts: Option<usize>,
    time_ms: f64,
    detail: Option<String>,
    gap: Option<netslice_core::GapReport>,
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Outcome {
    Solved,
    Infeasible,
    Limit,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Solved => 0,
            Outcome::Infeasible => 2,
            Outcome::Limit => 3,
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit with 1; clap's own code 2 means infeasible here.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a).map(|_| Outcome::Solved),
        Command::Solve(a) => cmd_solve(a),
        Command::Experiment(a) => cmd_experiment(a).map(|_| Outcome::Solved),
        Command::Verify(a) => cmd_verify(a),
        Command::ExportLp(a) => cmd_export(a).map(|_| Outcome::Solved),
    };
    match result {
        Ok(o) => ExitCode::from(o.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn parse_iter_max(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("iter_max must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    instance::load(path).with_context(|| format!("cannot load instance {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let inst = match a.example {
        Some(Example::Chain) => examples::chain_of_three(),
        Some(Example::Diamond) => examples::diamond(),
        None => {
            let mut cfg = match &a.config {
                Some(p) => {
                    let text = fs::read_to_string(p)
                        .with_context(|| format!("cannot read {}", p.display()))?;
                    toml::from_str::<GeneratorConfig>(&text)
                        .with_context(|| format!("invalid generator config {}", p.display()))?
                }
                None => GeneratorConfig::default(),
            };
            cfg.seed = a.seed.unwrap_or(cfg.seed);
            cfg.nodes = a.nodes.unwrap_or(cfg.nodes);
            cfg.clouds = a.clouds.unwrap_or(cfg.clouds);
            cfg.services = a.services.unwrap_or(cfg.services);
            cfg.chain_length = a.chain_length.unwrap_or(cfg.chain_length);
            cfg.infinite_links |= a.infinite_links;
            netslice_core::generate(&cfg)?
        }
    };
    write_out(a.out.as_deref(), &instance::to_json_string(&inst))
}

fn baseline_outcome(r: &BaselineResult) -> (Outcome, String, Option<f64>, Option<String>) {
    match &r.outcome {
        BaselineOutcome::Feasible {
            objective,
            proven_optimal,
            ..
        } => {
            let status = if *proven_optimal {
                "optimal"
            } else {
                "feasible"
            };
            let o = if r.limit_reached {
                Outcome::Limit
            } else {
                Outcome::Solved
            };
            (o, status.into(), Some(*objective), None)
        }
        BaselineOutcome::InfeasibleOrFailed { reason } => {
            let o = if r.limit_reached {
                Outcome::Limit
            } else {
                Outcome::Infeasible
            };
            (o, "infeasible_or_failed".into(), None, Some(reason.clone()))
        }
    }
}

fn cmd_solve(a: SolveArgs) -> Result<Outcome> {
    let inst = load_instance(&a.instance)?;
    let limit = match a.time_limit {
        Some(t) if t > 0.0 && t.is_finite() => Some(Duration::from_secs_f64(t)),
        Some(_) => bail!("--time-limit must be a positive number of seconds"),
        None => None,
    };
    let milp = MilpConfig {
        deadline: limit.map(|l| std::time::Instant::now() + l),
        ..MilpConfig::default()
    };
    let cbd_cfg = CbdConfig {
        iter_max: a.iter_max.unwrap_or(usize::MAX),
        variant: a.variant.into(),
        milp: MilpConfig::default(),
        time_limit: limit,
    };
    let start = std::time::Instant::now();
    let mut report = Report {
        algorithm: match a.alg {
            Alg::Cbd => "cbd",
            Alg::Direct => "direct",
            Alg::Lpor => "lpor",
            Alg::Lpdr => "lpdr",
            Alg::Oracle => "oracle",
        },
        variant: (a.alg == Alg::Cbd).then(|| FpVariant::from(a.variant).name()),
        status: String::new(),
        objective: None,
        iterations: None,
        cuts: None,
        time_ms: 0.0,
        detail: None,
        gap: None,
    };
    let (outcome, solution): (Outcome, Option<NsSolution>) = match a.alg {
        Alg::Cbd => {
            let r = solve_cbd(&inst, &cbd_cfg)?;
            report.status = r.status.name().into();
            report.iterations = Some(r.iterations.len());
            report.cuts = Some(r.cuts.len());
            if let Some(path) = &a.trace {
                let f = fs::File::create(path)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                write_trace_csv(&r.iterations, f)?;
            }
            match r.status {
                CbdStatus::Optimal(s) => {
                    report.objective = Some(s.objective);
                    (Outcome::Solved, Some(s.into()))
                }
                CbdStatus::Infeasible => (Outcome::Infeasible, None),
                CbdStatus::IterLimit | CbdStatus::TimeLimit => (Outcome::Limit, None),
            }
        }
        Alg::Direct | Alg::Lpor | Alg::Lpdr => {
            let r = match a.alg {
                Alg::Direct => solve_direct(&inst, &milp),
                Alg::Lpor => solve_lp_one_shot_rounding(&inst, &LpConfig::default()),
                _ => solve_lp_dynamic_rounding(&inst, &LpConfig::default(), milp.tol_int),
            };
            let (o, status, objective, detail) = baseline_outcome(&r);
            (report.status, report.objective, report.detail) = (status, objective, detail);
            let sol = match r.outcome {
                BaselineOutcome::Feasible { solution, .. } => Some(solution),
                BaselineOutcome::InfeasibleOrFailed { .. } => None,
            };
            (o, sol)
        }
        Alg::Oracle => match brute_force_ns(&inst)? {
            OracleResult::Optimal { objective, .. } => {
                report.status = "optimal".into();
                report.objective = Some(objective);
                (Outcome::Solved, None)
            }
            OracleResult::Infeasible => {
                report.status = "infeasible".into();
                (Outcome::Infeasible, None)
            }
        },
    };
    report.time_ms = start.elapsed().as_secs_f64() * 1e3;
    if a.gap {
        report.gap = Some(gap_improvement(
            &inst,
            &CbdConfig {
                time_limit: limit,
                ..CbdConfig::default()
            },
        )?);
    }

    println!("algorithm:  {}", report.algorithm);
    if let Some(v) = report.variant {
        println!("variant:    {v}");
    }
    println!("status:     {}", report.status);
    match report.objective {
        Some(o) => println!("objective:  {o}"),
        None => println!("objective:  -"),
    }
    if let (Some(i), Some(c)) = (report.iterations, report.cuts) {
        println!("iterations: {i}");
        println!("cuts:       {c}");
    }
    println!("time_ms:    {:.3}", report.time_ms);
    if let Some(d) = &report.detail {
        println!("detail:     {d}");
    }
    if let Some(g) = &report.gap {
        let show = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.6}"));
        println!("gap_fp1:    {}", show(g.fp_i));
        println!("gap_fp2:    {}", show(g.fp_ii));
    }
    if let Some(path) = &a.report {
        let text = serde_json::to_string_pretty(&report)?;
        fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    if let (Some(path), Some(sol)) = (&a.solution, &solution) {
        fs::write(path, solution_to_json(&inst, sol))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(outcome)
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config)
        .with_context(|| format!("cannot read {}", a.config.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    let out = run_experiment(&cfg)?;
    out.write_csv(&a.out)?;
    println!("services,algorithm,instances,feasible,avg_objective,avg_iterations,avg_time_ms");
    let show = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.3}"));
    for r in out.summary() {
        println!(
            "{},{},{},{},{},{},{:.3}",
            r.services,
            r.algorithm,
            r.instances,
            r.feasible,
            show(r.avg_objective),
            show(r.avg_iterations),
            r.avg_time_ms
        );
    }
    eprintln!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> Result<Outcome> {
    let inst = load_instance(&a.instance)?;
    let text = fs::read_to_string(&a.solution)
        .with_context(|| format!("cannot read {}", a.solution.display()))?;
    let sol = solution_from_json(&inst, &text)?;
    let report = verify(&inst, &sol, a.tol);
    println!("{}", report.to_string().trim_end());
    Ok(if report.is_feasible() {
        Outcome::Solved
    } else {
        Outcome::Infeasible
    })
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let reach = analyze(&inst);
    let model = match a.model {
        ModelKind::Ns => build_ns(&inst),
        ModelKind::Fp => build_fp(&inst, FpVariant::Fp, &reach),
        ModelKind::Fp1 => build_fp(&inst, FpVariant::FpI, &reach),
        ModelKind::Fp2 => build_fp(&inst, FpVariant::FpII, &reach),
    };
    write_out(
        a.out.as_deref(),
        &write_lp_format(&model.program.lp, &model.program.binaries),
    )
}
