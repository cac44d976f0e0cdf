//! Random robust MST/TSP instances, batch runs, summary tables and performance profiles.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnb::{evaluate_root, solve_bnb, BnbConfig, BnbStatus};
use crate::error::SolveError;
use crate::model::{Graph, Instance, InstanceMeta, ModelError, ProblemKind, Scenario, ScenarioSet};
use crate::oracles::{ExternalOracle, HeldKarpOracle, KruskalOracle, LinearOracle, OracleError};
use crate::scalar::Scalar;
use crate::sd::{DropRule, SdStatus};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid generator spec: {0}")]
    Spec(String),
    #[error("invalid solver tag {0:?}")]
    SolverTag(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub kind: ProblemKind,
    pub nodes: usize,
    pub scenarios: usize,
    /// Distance of every scenario from the nominal costs; zero is accepted for tests.
    pub beta: f64,
    pub seed: u64,
    pub replicate: u64,
}

impl GeneratorSpec {
    pub fn new(kind: ProblemKind, nodes: usize, scenarios: usize, beta: f64, seed: u64) -> Self {
        GeneratorSpec {
            kind,
            nodes,
            scenarios,
            beta,
            seed,
            replicate: 0,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.kind == ProblemKind::Generic {
            return Err(BenchError::Spec("only mst and tsp instances can be generated".into()));
        }
        if self.nodes < 3 {
            return Err(BenchError::Spec(format!("need at least 3 nodes, got {}", self.nodes)));
        }
        if self.scenarios == 0 {
            return Err(BenchError::Spec("need at least one scenario".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(BenchError::Spec(format!(
                "beta must be finite and nonnegative, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        format!(
            "{}-n{}-m{}-b{}-s{}-r{}",
            self.kind, self.nodes, self.scenarios, self.beta, self.seed, self.replicate
        )
    }

    /// Seed of the instance stream: `seed + replicate * 0x9E3779B97F4A7C15` (wrapping).
    pub fn stream_seed(&self) -> u64 {
        self.seed
            .wrapping_add(self.replicate.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Nominal costs uniform on `[1,2]`; each scenario adds `beta` times a random unit
/// vector (signed for MST, nonnegative for TSP). Constants are zero.
pub fn generate_instance<T: Scalar>(spec: &GeneratorSpec) -> Result<Instance<T>, BenchError> {
    spec.validate()?;
    let graph = Graph::complete(spec.nodes);
    let n = graph.edge_count();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.stream_seed());
    let nominal: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..=2.0)).collect();
    let nonnegative = spec.kind == ProblemKind::Tsp;
    let mut scenarios = Vec::with_capacity(spec.scenarios);
    for _ in 0..spec.scenarios {
        let u = unit_vector(&mut rng, n, nonnegative);
        let costs = nominal
            .iter()
            .zip(&u)
            .map(|(&c, &d)| convert::<T>(c + spec.beta * d))
            .collect::<Result<Vec<T>, _>>()?;
        scenarios.push(Scenario::new(T::zero(), costs));
    }
    let meta = InstanceMeta {
        nominal: Some(nominal),
        beta: Some(spec.beta),
        seed: Some(spec.seed),
        replicate: Some(spec.replicate),
        unit_vector: Some(if nonnegative { "nonnegative" } else { "signed" }.to_string()),
        extra: Default::default(),
    };
    Ok(Instance::new(spec.name(), spec.kind, Some(graph), ScenarioSet::new(scenarios)?)?.with_meta(meta))
}

fn convert<T: Scalar>(v: f64) -> Result<T, ModelError> {
    T::from_f64(v)
        .filter(|t| t.is_finite())
        .ok_or(ModelError::Conversion(v))
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize, nonnegative: bool) -> Vec<f64> {
    loop {
        let mut g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if nonnegative {
            g.iter_mut().for_each(|x| *x = x.abs());
        }
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            g.iter_mut().for_each(|x| *x /= norm);
            return g;
        }
    }
}

/// One solver variant of a benchmark: a dropping rule plus warmstart, or root-only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SolverConfig {
    pub drop_rule: DropRule,
    pub warmstart: bool,
    pub root_only: bool,
}

impl SolverConfig {
    pub fn bnb(drop_rule: DropRule, warmstart: bool) -> Self {
        SolverConfig {
            drop_rule,
            warmstart,
            root_only: false,
        }
    }

    pub fn root(drop_rule: DropRule) -> Self {
        SolverConfig {
            drop_rule,
            warmstart: false,
            root_only: true,
        }
    }

    pub fn tag(&self) -> String {
        let mode = match (self.root_only, self.warmstart) {
            (true, _) => "root",
            (false, true) => "ws",
            (false, false) => "nows",
        };
        format!("{}-{mode}", self.drop_rule)
    }
}

impl FromStr for SolverConfig {
    type Err = BenchError;
    /// Parses tags such as `d0-ws`, `d2-nows` or `d1-root`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BenchError::SolverTag(s.to_string());
        let (rule, mode) = s.split_once('-').ok_or_else(bad)?;
        let rule: DropRule = rule.parse().map_err(|_| bad())?;
        match mode {
            "ws" => Ok(SolverConfig::bnb(rule, true)),
            "nows" => Ok(SolverConfig::bnb(rule, false)),
            "root" => Ok(SolverConfig::root(rule)),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for SolverConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.tag())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleChoice {
    Internal,
    /// Shell command speaking the line protocol.
    External(String),
}

impl FromStr for OracleChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "internal" {
            Ok(OracleChoice::Internal)
        } else if let Some(cmd) = s.strip_prefix("external:") {
            if cmd.trim().is_empty() {
                Err("external oracle needs a command".into())
            } else {
                Ok(OracleChoice::External(cmd.to_string()))
            }
        } else {
            Err(format!("unknown oracle {s:?} (expected internal or external:<cmd>)"))
        }
    }
}

/// Kruskal for MST, Held-Karp for TSP, or the configured external command.
pub fn make_oracle<T: Scalar>(
    instance: &Instance<T>,
    choice: &OracleChoice,
) -> Result<Box<dyn LinearOracle<T> + Send + Sync>, OracleError> {
    match choice {
        OracleChoice::External(cmd) => Ok(Box::new(ExternalOracle::for_instance(cmd.clone(), instance))),
        OracleChoice::Internal => match instance.kind {
            ProblemKind::Mst => Ok(Box::new(KruskalOracle::for_instance(instance)?)),
            ProblemKind::Tsp => Ok(Box::new(HeldKarpOracle::for_instance(instance)?)),
            ProblemKind::Generic => Err(OracleError::WrongKind {
                expected: ProblemKind::Mst,
                got: ProblemKind::Generic,
            }),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RunStatus {
    Solved,
    TimeLimit,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: String,
    pub solver: String,
    pub status: RunStatus,
    pub time_s: f64,
    pub iterations: usize,
    pub nodes: usize,
    pub bound: Option<f64>,
    pub value: Option<f64>,
}

impl RunRecord {
    fn error(instance: &str, solver: &str, time: Duration) -> Self {
        RunRecord {
            instance: instance.to_string(),
            solver: solver.to_string(),
            status: RunStatus::Error,
            time_s: time.as_secs_f64(),
            iterations: 0,
            nodes: 0,
            bound: None,
            value: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub time_limit: Duration,
    pub oracle: OracleChoice,
    /// Concurrent runs; zero uses every core.
    pub jobs: usize,
    pub perturbation: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            time_limit: Duration::from_secs(3600),
            oracle: OracleChoice::Internal,
            jobs: 0,
            perturbation: 0.0,
        }
    }
}

/// Runs one solver on one instance; failures become `ERROR` records.
pub fn run_one(instance: &Instance<f64>, solver: &SolverConfig, options: &BenchOptions) -> RunRecord {
    let start = Instant::now();
    let tag = solver.tag();
    match try_run(instance, solver, options) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{} {tag}: {e}", instance.name);
            RunRecord::error(&instance.name, &tag, start.elapsed())
        }
    }
}

fn try_run(instance: &Instance<f64>, solver: &SolverConfig, options: &BenchOptions) -> Result<RunRecord, SolveError> {
    let oracle = make_oracle(instance, &options.oracle)?;
    let config = BnbConfig {
        drop_rule: solver.drop_rule,
        warmstart: solver.warmstart,
        time_limit: options.time_limit,
        perturbation: options.perturbation,
        ..BnbConfig::default()
    };
    let tag = solver.tag();
    if solver.root_only {
        let root = evaluate_root(instance, &oracle, &config)?;
        let status = match root.status {
            SdStatus::Optimal => RunStatus::Solved,
            SdStatus::TimeLimit => RunStatus::TimeLimit,
            _ => RunStatus::Error,
        };
        return Ok(RunRecord {
            instance: instance.name.clone(),
            solver: tag,
            status,
            time_s: root.time.as_secs_f64(),
            iterations: root.iterations,
            nodes: 1,
            bound: Some(root.best_lb).filter(|b| b.is_finite()),
            value: Some(root.value),
        });
    }
    let res = solve_bnb(instance, &oracle, &config)?;
    Ok(RunRecord {
        instance: instance.name.clone(),
        solver: tag,
        status: match res.status {
            BnbStatus::Solved => RunStatus::Solved,
            BnbStatus::TimeLimit => RunStatus::TimeLimit,
        },
        time_s: res.wall_time.as_secs_f64(),
        iterations: res.total_sd_iterations,
        nodes: res.node_count,
        bound: Some(res.global_lb).filter(|b| b.is_finite()),
        value: Some(res.value),
    })
}

/// Generates every spec and runs every solver on it.
pub fn run_benchmark(
    specs: &[GeneratorSpec],
    solvers: &[SolverConfig],
    options: &BenchOptions,
) -> Result<Vec<RunRecord>, BenchError> {
    let instances = specs
        .iter()
        .map(generate_instance::<f64>)
        .collect::<Result<Vec<_>, _>>()?;
    run_instances(&instances, solvers, options)
}

/// Records come back ordered by instance, then solver, whatever the scheduling.
pub fn run_instances(
    instances: &[Instance<f64>],
    solvers: &[SolverConfig],
    options: &BenchOptions,
) -> Result<Vec<RunRecord>, BenchError> {
    let pairs: Vec<(&Instance<f64>, &SolverConfig)> = instances
        .iter()
        .flat_map(|i| solvers.iter().map(move |s| (i, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| io::Error::other(e.to_string()))?;
    Ok(pool.install(|| pairs.par_iter().map(|(i, s)| run_one(i, s, options)).collect()))
}

pub fn write_records_csv<W: io::Write>(records: &[RunRecord], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record([
            "instance",
            "solver",
            "status",
            "time_s",
            "iterations",
            "nodes",
            "bound",
            "value",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: io::Read>(input: R) -> Result<Vec<RunRecord>, BenchError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<Vec<RunRecord>, _>>()?)
}

/// Averages over solved runs for one instance group and solver.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub group: String,
    pub solver: String,
    pub runs: usize,
    pub solved: usize,
    pub time_s: Option<f64>,
    pub iterations: Option<f64>,
    pub nodes: Option<f64>,
}

/// Instance group of a generated name: `mst-n6-m20-b1-s7-r0` belongs to `mst-n6-m20`.
pub fn instance_group(name: &str) -> &str {
    match name.find("-b") {
        Some(i) => &name[..i],
        None => name,
    }
}

pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((instance_group(&r.instance).to_string(), r.solver.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((group, solver), rs)| {
            let solved: Vec<&RunRecord> = rs.iter().copied().filter(|r| r.status == RunStatus::Solved).collect();
            let mean = |f: &dyn Fn(&RunRecord) -> f64| {
                (!solved.is_empty()).then(|| solved.iter().map(|r| f(r)).sum::<f64>() / solved.len() as f64)
            };
            SummaryRow {
                time_s: mean(&|r| r.time_s),
                iterations: mean(&|r| r.iterations as f64),
                nodes: mean(&|r| r.nodes as f64),
                group,
                solver,
                runs: rs.len(),
                solved: solved.len(),
            }
        })
        .collect()
}

/// Aligned text rendering of [`summarize`].
pub fn format_summary(rows: &[SummaryRow]) -> String {
    let header = ["group", "solver", "#sol", "time", "#it", "#nodes"];
    let cell = |v: Option<f64>, digits: usize| v.map_or("-".to_string(), |x| format!("{x:.digits$}"));
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.group.clone(),
                r.solver.clone(),
                format!("{}/{}", r.solved, r.runs),
                cell(r.time_s, 3),
                cell(r.iterations, 1),
                cell(r.nodes, 1),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[&str]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&header);
    for row in &body {
        line(&row.iter().map(String::as_str).collect::<Vec<_>>());
    }
    out
}

/// Step-function breakpoints `(tau, rho)` of one solver's profile.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileCurve {
    pub solver: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerformanceProfile {
    pub curves: Vec<ProfileCurve>,
    /// Instances no solver finished; they count in the denominator only.
    pub unsolved: Vec<usize>,
}

/// Times below this are treated as equal to it, so ratios stay finite.
pub const MIN_PROFILE_TIME: f64 = 1e-6;

/// `times[s][p]` is solver `s` on instance `p`, `None` marking a failure.
pub fn performance_profile(solvers: &[String], times: &[Vec<Option<f64>>]) -> PerformanceProfile {
    let instances = times.first().map_or(0, Vec::len);
    let best: Vec<Option<f64>> = (0..instances)
        .map(|p| {
            times
                .iter()
                .filter_map(|row| row[p])
                .map(|t| t.max(MIN_PROFILE_TIME))
                .min_by(f64::total_cmp)
        })
        .collect();
    let unsolved = (0..instances).filter(|&p| best[p].is_none()).collect();
    let curves = solvers
        .iter()
        .zip(times)
        .map(|(name, row)| {
            let mut ratios: Vec<f64> = row
                .iter()
                .zip(&best)
                .filter_map(|(t, b)| Some(t.as_ref()?.max(MIN_PROFILE_TIME) / (*b)?))
                .collect();
            ratios.sort_by(f64::total_cmp);
            let total = instances.max(1) as f64;
            let mut points = vec![];
            let below_one = ratios.iter().filter(|&&r| r <= 1.0).count();
            points.push((1.0, below_one as f64 / total));
            for (i, &r) in ratios.iter().enumerate() {
                if r <= 1.0 {
                    continue;
                }
                let rho = (i + 1) as f64 / total;
                match points.last_mut() {
                    Some(last) if last.0 == r => last.1 = rho,
                    _ => points.push((r, rho)),
                }
            }
            ProfileCurve {
                solver: name.clone(),
                points,
            }
        })
        .collect();
    PerformanceProfile { curves, unsolved }
}

/// Builds the solver × instance time matrix from records; non-solved runs are failures.
pub fn profile_from_records(records: &[RunRecord]) -> PerformanceProfile {
    let mut solvers: Vec<String> = Vec::new();
    let mut instances: Vec<String> = Vec::new();
    for r in records {
        if !solvers.contains(&r.solver) {
            solvers.push(r.solver.clone());
        }
        if !instances.contains(&r.instance) {
            instances.push(r.instance.clone());
        }
    }
    let mut times = vec![vec![None; instances.len()]; solvers.len()];
    for r in records {
        let s = solvers.iter().position(|x| *x == r.solver).expect("collected above");
        let p = instances
            .iter()
            .position(|x| *x == r.instance)
            .expect("collected above");
        if r.status == RunStatus::Solved {
            times[s][p] = Some(r.time_s);
        }
    }
    performance_profile(&solvers, &times)
}

pub fn write_profile_csv<W: io::Write>(profile: &PerformanceProfile, out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["solver", "tau", "rho"])?;
    for c in &profile.curves {
        for &(tau, rho) in &c.points {
            w.write_record([c.solver.clone(), tau.to_string(), rho.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
