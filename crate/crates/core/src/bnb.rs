//! Depth-first branch-and-bound with simplicial-decomposition relaxations.
//!
//! Children inherit the parent's active vertices that respect their fixing,
//! nodes are cut off as soon as a per-iteration lower bound reaches the
//! incumbent, and every vertex produced by the oracle is a candidate incumbent.

use std::time::{Duration, Instant};

use crate::error::SolveError;
use crate::model::{Instance, Vertex};
use crate::oracles::{Fixings, LinearOracle, Restricted};
use crate::scalar::Scalar;
use crate::sd::{run_sd, DropRule, SdConfig, SdResult, SdStatus};

const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct BnbConfig<T> {
    pub drop_rule: DropRule,
    pub warmstart: bool,
    pub time_limit: Duration,
    pub stop_tol: T,
    pub perturbation: T,
    pub rng_seed: u64,
    pub max_sd_iterations: usize,
    /// Keep one [`NodeRecord`] per processed node in the result.
    pub record_nodes: bool,
    /// Print one line per node and per relaxation iteration to stderr.
    pub trace: bool,
}

impl<T: Scalar> Default for BnbConfig<T> {
    fn default() -> Self {
        BnbConfig {
            drop_rule: DropRule::D0,
            warmstart: true,
            time_limit: Duration::from_secs(3600),
            stop_tol: T::lit(1e-6),
            perturbation: T::zero(),
            rng_seed: 0,
            max_sd_iterations: 100_000,
            record_nodes: false,
            trace: false,
        }
    }
}

impl<T: Scalar> BnbConfig<T> {
    fn sd_config(&self, deadline: Instant, cutoff: Option<T>, seed: u64) -> SdConfig<T> {
        SdConfig {
            drop_rule: self.drop_rule,
            stop_tol: self.stop_tol,
            max_iterations: self.max_sd_iterations,
            perturbation: self.perturbation,
            rng_seed: seed,
            cutoff,
            deadline: Some(deadline),
            trace: self.trace,
            ..SdConfig::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnbStatus {
    Solved,
    TimeLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeOutcome {
    /// A lower bound reached the cutoff during the relaxation.
    Cutoff,
    /// The finished relaxation did not beat the incumbent.
    Bound,
    /// The relaxation minimizer is binary.
    Integral,
    Branched {
        variable: usize,
    },
    /// The time limit interrupted the relaxation.
    Open,
}

impl std::fmt::Display for NodeOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeOutcome::Cutoff => f.write_str("cutoff"),
            NodeOutcome::Bound => f.write_str("bound"),
            NodeOutcome::Integral => f.write_str("integral"),
            NodeOutcome::Branched { variable } => write!(f, "branch x{variable}"),
            NodeOutcome::Open => f.write_str("open"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NodeRecord<T> {
    pub index: usize,
    pub depth: usize,
    pub fixings: Fixings,
    pub parent_bound: T,
    pub bound: T,
    pub cutoff: Option<T>,
    pub inherited: usize,
    pub sd_status: SdStatus,
    pub sd_iterations: usize,
    pub outcome: NodeOutcome,
}

#[derive(Clone, Debug)]
pub struct BnbResult<T> {
    pub status: BnbStatus,
    pub incumbent: Vertex,
    pub value: T,
    pub global_lb: T,
    pub node_count: usize,
    pub total_sd_iterations: usize,
    pub wall_time: Duration,
    pub nodes: Vec<NodeRecord<T>>,
}

#[derive(Clone, Debug)]
pub struct BnbNode<T> {
    pub fixings: Fixings,
    pub inherited_vertices: Vec<Vertex>,
    pub depth: usize,
    pub parent_bound: T,
}

/// Index of the fractional coordinate closest to one, lowest index on ties.
pub fn branching_variable<T: Scalar>(x: &[T]) -> Option<usize> {
    let tol = T::lit(INTEGRALITY_TOL);
    let mut best: Option<(usize, T)> = None;
    for (i, &xi) in x.iter().enumerate() {
        let frac = xi - xi.floor();
        if frac < tol || frac > T::one() - tol {
            continue;
        }
        if best.is_none_or(|(_, b)| frac > b) {
            best = Some((i, frac));
        }
    }
    best.map(|(i, _)| i)
}

fn rounded<T: Scalar>(x: &[T]) -> Vertex {
    Vertex::new(x.iter().map(|&xi| xi > T::lit(0.5)).collect())
}

pub fn solve_bnb<T: Scalar, O: LinearOracle<T> + ?Sized>(
    instance: &Instance<T>,
    oracle: &O,
    config: &BnbConfig<T>,
) -> Result<BnbResult<T>, SolveError> {
    if !oracle.supports_fixings() {
        return Err(SolveError::FixingsUnsupported);
    }
    let start = Instant::now();
    let deadline = start + config.time_limit;
    let scenarios = &instance.scenarios;

    let mut stack = vec![BnbNode {
        fixings: Fixings::new(),
        inherited_vertices: Vec::new(),
        depth: 0,
        parent_bound: T::neg_infinity(),
    }];
    let mut incumbent: Option<(Vertex, T)> = None;
    let mut closed_lb = T::infinity();
    let mut open_lb: Option<T> = None;
    let mut node_count = 0usize;
    let mut total_iterations = 0usize;
    let mut nodes = Vec::new();

    while let Some(node) = stack.pop() {
        if node_count > 0 && Instant::now() >= deadline {
            open_lb = Some(node.parent_bound);
            break;
        }
        let index = node_count;
        node_count += 1;
        let cutoff = incumbent.as_ref().map(|(_, v)| *v - config.stop_tol);
        let restricted = Restricted::new(oracle, &node.fixings);
        let initial = if config.warmstart {
            &node.inherited_vertices[..]
        } else {
            &[]
        };
        let sd_cfg = config.sd_config(deadline, cutoff, config.rng_seed.wrapping_add(index as u64));
        let node_err = |e: SolveError| match e {
            SolveError::InfeasibleRoot if node.depth > 0 => SolveError::InfeasibleNode {
                depth: node.depth,
                fixed: node.fixings.len(),
            },
            e => e,
        };
        let mut res = run_sd(&restricted, scenarios, initial, &sd_cfg).map_err(node_err)?;
        let mut iterations = res.iterations;
        if res.status == SdStatus::CycleDetected {
            let retry = SdConfig {
                drop_rule: DropRule::D0,
                ..sd_cfg.clone()
            };
            let again = run_sd(&restricted, scenarios, res.final_set.vertices(), &retry).map_err(node_err)?;
            iterations += again.iterations;
            let first = res.incumbent.clone();
            res = again;
            if first.1 < res.incumbent.1 {
                res.incumbent = first;
            }
        }
        total_iterations += iterations;
        offer(&mut incumbent, &res.incumbent);

        let bound = res.best_lb.max(node.parent_bound);
        let prune_at = incumbent.as_ref().map(|(_, v)| *v - config.stop_tol);
        let outcome = match res.status {
            SdStatus::TimeLimit => NodeOutcome::Open,
            SdStatus::Cutoff => NodeOutcome::Cutoff,
            _ if prune_at.is_some_and(|c| bound >= c) => NodeOutcome::Bound,
            _ => match branching_variable(&res.x_star) {
                None => NodeOutcome::Integral,
                Some(variable) => NodeOutcome::Branched { variable },
            },
        };
        log_node(
            config, &mut nodes, &node, index, bound, cutoff, &res, iterations, outcome,
        );

        match outcome {
            NodeOutcome::Open => {
                open_lb = Some(bound);
                break;
            }
            NodeOutcome::Cutoff | NodeOutcome::Bound => closed_lb = closed_lb.min(bound),
            NodeOutcome::Integral => {
                let v = rounded(&res.x_star);
                let (val, _) = scenarios.evaluate_vertex(&v)?;
                offer(&mut incumbent, &(v, val));
                closed_lb = closed_lb.min(bound.min(val));
            }
            NodeOutcome::Branched { variable } => {
                let (ones, zeros): (Vec<Vertex>, Vec<Vertex>) =
                    res.final_set.vertices().iter().cloned().partition(|v| v.get(variable));
                for (value, inherited) in [(false, zeros), (true, ones)] {
                    stack.push(BnbNode {
                        fixings: node.fixings.clone().with(variable, value)?,
                        inherited_vertices: inherited,
                        depth: node.depth + 1,
                        parent_bound: bound,
                    });
                }
            }
        }
    }

    let (incumbent, value) = incumbent.expect("root node always yields a vertex");
    let (status, global_lb) = match open_lb {
        None => (BnbStatus::Solved, value.min(closed_lb)),
        Some(lb) => {
            let weakest = stack.iter().map(|n| n.parent_bound).fold(lb, T::min);
            (BnbStatus::TimeLimit, weakest.min(closed_lb).min(value))
        }
    };
    Ok(BnbResult {
        status,
        incumbent,
        value,
        global_lb,
        node_count,
        total_sd_iterations: total_iterations,
        wall_time: start.elapsed(),
        nodes,
    })
}

fn offer<T: Scalar>(incumbent: &mut Option<(Vertex, T)>, candidate: &(Vertex, T)) {
    if incumbent.as_ref().is_none_or(|(_, best)| candidate.1 < *best) {
        *incumbent = Some(candidate.clone());
    }
}

#[allow(clippy::too_many_arguments)]
fn log_node<T: Scalar>(
    config: &BnbConfig<T>,
    nodes: &mut Vec<NodeRecord<T>>,
    node: &BnbNode<T>,
    index: usize,
    bound: T,
    cutoff: Option<T>,
    res: &SdResult<T>,
    iterations: usize,
    outcome: NodeOutcome,
) {
    if config.trace {
        eprintln!(
            "node {index} depth={} fixed={} bound={bound} it={iterations} {outcome}",
            node.depth,
            node.fixings.len()
        );
    }
    if config.record_nodes {
        nodes.push(NodeRecord {
            index,
            depth: node.depth,
            fixings: node.fixings.clone(),
            parent_bound: node.parent_bound,
            bound,
            cutoff,
            inherited: node.inherited_vertices.len(),
            sd_status: res.status,
            sd_iterations: iterations,
            outcome,
        });
    }
}

#[derive(Clone, Debug)]
pub struct RootEvaluation<T> {
    pub status: SdStatus,
    /// Relaxation value `f(x_star)`.
    pub value: T,
    pub best_lb: T,
    pub time: Duration,
    pub iterations: usize,
}

/// Solves the relaxation at the root only; fixings are never requested.
pub fn evaluate_root<T: Scalar, O: LinearOracle<T> + ?Sized>(
    instance: &Instance<T>,
    oracle: &O,
    config: &BnbConfig<T>,
) -> Result<RootEvaluation<T>, SolveError> {
    let start = Instant::now();
    let sd_cfg = config.sd_config(start + config.time_limit, None, config.rng_seed);
    let res = run_sd(oracle, &instance.scenarios, &[], &sd_cfg)?;
    Ok(RootEvaluation {
        status: res.status,
        value: res.value,
        best_lb: res.best_lb,
        time: start.elapsed(),
        iterations: res.iterations,
    })
}
