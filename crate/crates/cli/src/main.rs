use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use robsd::bench::{
    format_summary, generate_instance, make_oracle, profile_from_records, read_records_csv, run_benchmark, summarize,
    write_profile_csv, write_records_csv, BenchOptions, GeneratorSpec, OracleChoice, SolverConfig,
};
use robsd::model::{load_instance, save_instance};
use robsd::{evaluate_root, solve_bnb, BnbConfig, BnbStatus, DropRule, InstanceF64, ProblemKind};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "robsd",
    version,
    about = "Min-max robust binary optimization by simplicial decomposition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random robust MST or TSP instance as JSON.
    Generate(GenerateArgs),
    /// Solve an instance exactly by branch-and-bound.
    Solve(SolveArgs),
    /// Solve only the convex relaxation at the root.
    Root(SolveArgs),
    /// Generate instances, run solver variants and write a results CSV.
    Bench(BenchArgs),
    /// Turn a results CSV into performance-profile breakpoints.
    Profile(ProfileArgs),
    /// Answer one external-oracle request on stdin with the internal oracle.
    #[command(hide = true)]
    OracleServe { instance: PathBuf },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "mst")]
    problem: ProblemKind,
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    scenarios: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    replicate: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value = "d0")]
    drop: DropRule,
    #[arg(long, overrides_with = "no_warmstart")]
    warmstart: bool,
    #[arg(long)]
    no_warmstart: bool,
    /// Uniform scenario noise half-width.
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
    /// Seed for the perturbation noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    /// `internal` or `external:<shell command>`.
    #[arg(long, default_value = "internal")]
    oracle: OracleChoice,
    #[arg(long)]
    trace: bool,
}

impl SolverArgs {
    fn config(&self) -> Result<BnbConfig<f64>, Failure> {
        Ok(BnbConfig {
            drop_rule: self.drop,
            warmstart: !self.no_warmstart,
            time_limit: time_limit(self.time_limit)?,
            perturbation: self.perturb,
            rng_seed: self.seed,
            trace: self.trace,
            ..BnbConfig::default()
        })
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "mst")]
    problem: ProblemKind,
    #[arg(long, value_delimiter = ',', required = true)]
    nodes: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    scenarios: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    beta: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    replicates: u64,
    /// Solver tags such as d0-ws, d2-nows, d1-root.
    #[arg(long, value_delimiter = ',', default_value = "d0-ws")]
    solvers: Vec<SolverConfig>,
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 0.0)]
    perturb: f64,
    #[arg(long, default_value = "internal")]
    oracle: OracleChoice,
    /// Concurrent runs; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Results CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Results CSV written by `bench`.
    results: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Solver(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Solver(e.to_string())
    }
}

fn time_limit(secs: f64) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(secs).map_err(|_| Failure::Usage(format!("invalid time limit {secs}")))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn load(path: &Path) -> Result<InstanceF64, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    load_instance(&bytes).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn json_line<S: Serialize>(v: &S) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("plain data serializes");
    bytes.push(b'\n');
    bytes
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    instance: &'a str,
    solver: String,
    status: &'static str,
    value: f64,
    global_lb: Option<f64>,
    incumbent: Vec<u8>,
    nodes: usize,
    iterations: usize,
}

#[derive(Serialize)]
struct RootOutput<'a> {
    instance: &'a str,
    solver: String,
    status: String,
    value: f64,
    best_lb: Option<f64>,
    iterations: usize,
}

fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let spec = GeneratorSpec {
        kind: args.problem,
        nodes: args.nodes,
        scenarios: args.scenarios,
        beta: args.beta,
        seed: args.seed,
        replicate: args.replicate,
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let inst = generate_instance::<f64>(&spec)?;
    emit(args.out.as_deref(), &save_instance(&inst))
}

fn solve(args: &SolveArgs) -> Result<(), Failure> {
    let inst = load(&args.instance)?;
    let config = args.solver.config()?;
    let oracle = make_oracle(&inst, &args.solver.oracle)?;
    let res = solve_bnb(&inst, &oracle, &config)?;
    eprintln!(
        "{}: {:?} value={} nodes={} time={:.3}s",
        inst.name,
        res.status,
        res.value,
        res.node_count,
        res.wall_time.as_secs_f64()
    );
    let out = SolveOutput {
        instance: &inst.name,
        solver: SolverConfig::bnb(config.drop_rule, config.warmstart).tag(),
        status: match res.status {
            BnbStatus::Solved => "SOLVED",
            BnbStatus::TimeLimit => "TIME_LIMIT",
        },
        value: res.value,
        global_lb: Some(res.global_lb).filter(|b| b.is_finite()),
        incumbent: res.incumbent.bits().iter().map(|&b| b as u8).collect(),
        nodes: res.node_count,
        iterations: res.total_sd_iterations,
    };
    emit(args.out.as_deref(), &json_line(&out))
}

fn root(args: &SolveArgs) -> Result<(), Failure> {
    let inst = load(&args.instance)?;
    let config = args.solver.config()?;
    let oracle = make_oracle(&inst, &args.solver.oracle)?;
    let res = evaluate_root(&inst, &oracle, &config)?;
    eprintln!(
        "{}: {:?} value={} time={:.3}s",
        inst.name,
        res.status,
        res.value,
        res.time.as_secs_f64()
    );
    let out = RootOutput {
        instance: &inst.name,
        solver: SolverConfig::root(config.drop_rule).tag(),
        status: format!("{:?}", res.status),
        value: res.value,
        best_lb: Some(res.best_lb).filter(|b| b.is_finite()),
        iterations: res.iterations,
    };
    emit(args.out.as_deref(), &json_line(&out))
}

fn run_bench(args: &BenchArgs) -> Result<(), Failure> {
    let mut specs = Vec::new();
    for &nodes in &args.nodes {
        for &m in &args.scenarios {
            for &beta in &args.beta {
                for replicate in 0..args.replicates {
                    let spec = GeneratorSpec {
                        kind: args.problem,
                        nodes,
                        scenarios: m,
                        beta,
                        seed: args.seed,
                        replicate,
                    };
                    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
                    specs.push(spec);
                }
            }
        }
    }
    let options = BenchOptions {
        time_limit: time_limit(args.time_limit)?,
        oracle: args.oracle.clone(),
        jobs: args.jobs,
        perturbation: args.perturb,
    };
    let records = run_benchmark(&specs, &args.solvers, &options)?;
    let mut csv = Vec::new();
    write_records_csv(&records, &mut csv)?;
    emit(args.out.as_deref(), &csv)?;
    let table = format_summary(&summarize(&records));
    if args.out.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    Ok(())
}

fn profile(args: &ProfileArgs) -> Result<(), Failure> {
    let file = fs::File::open(&args.results).map_err(|e| Failure::Usage(format!("{}: {e}", args.results.display())))?;
    let records = read_records_csv(file)?;
    let prof = profile_from_records(&records);
    if !prof.unsolved.is_empty() {
        eprintln!(
            "{} instance(s) solved by no solver are excluded from every ratio",
            prof.unsolved.len()
        );
    }
    let mut csv = Vec::new();
    write_profile_csv(&prof, &mut csv)?;
    emit(args.out.as_deref(), &csv)
}

fn oracle_serve(path: &Path) -> Result<(), Failure> {
    let inst = load(path)?;
    let oracle = make_oracle(&inst, &OracleChoice::Internal)?;
    let stdin = io::stdin();
    robsd::oracles::serve_request::<f64>(&oracle, stdin.lock(), io::stdout().lock())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve(a),
        Command::Root(a) => root(a),
        Command::Bench(a) => run_bench(a),
        Command::Profile(a) => profile(a),
        Command::OracleServe { instance } => oracle_serve(instance),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
