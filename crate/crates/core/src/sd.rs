//! Simplicial decomposition for `min f(x)` over the convex hull of the feasible set.
//!
//! Each iteration solves the master over the current active set, asks the
//! linear oracle for a minimizer of the resulting subgradient, and either
//! stops (no improving vertex) or extends the active set after applying the
//! configured dropping rule. Every iteration also yields a valid lower bound
//! `f(x) + c·(x_hat - x)` on the relaxation.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::SolveError;
use crate::lp::{LpOptions, PivotRule};
use crate::master::{solve_master, ActiveSet, MasterOptions, MasterSolution};
use crate::model::{ScenarioSet, Vertex};
use crate::oracles::{Fixings, LinearOracle};
use crate::scalar::{dot, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DropRule {
    /// Never drop.
    #[default]
    D0,
    /// Drop every vertex with zero weight.
    D1,
    /// Drop zero-weight vertices only along strict ascent directions.
    D2,
}

impl std::str::FromStr for DropRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "d0" => Ok(DropRule::D0),
            "d1" => Ok(DropRule::D1),
            "d2" => Ok(DropRule::D2),
            _ => Err(format!("unknown drop rule {s:?} (expected d0, d1 or d2)")),
        }
    }
}

impl std::fmt::Display for DropRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DropRule::D0 => "d0",
            DropRule::D1 => "d1",
            DropRule::D2 => "d2",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SdConfig<T> {
    pub drop_rule: DropRule,
    pub d2_epsilon: T,
    pub stop_tol: T,
    pub max_iterations: usize,
    /// Half-width of the uniform noise added once to every scenario entry.
    pub perturbation: T,
    pub rng_seed: u64,
    /// Stop as soon as a lower bound reaches this value.
    pub cutoff: Option<T>,
    /// Scenario to favour among optimal multipliers, cycled by iteration.
    pub dual_preference: Vec<usize>,
    /// Vertex position to favour among optimal weights, cycled by iteration.
    pub primal_preference: Vec<usize>,
    pub deadline: Option<Instant>,
    pub lp: LpOptions<T>,
    /// Print one line per iteration to stderr.
    pub trace: bool,
}

impl<T: Scalar> Default for SdConfig<T> {
    fn default() -> Self {
        SdConfig {
            drop_rule: DropRule::D0,
            d2_epsilon: T::lit(1e-6),
            stop_tol: T::tolerances().reporting,
            max_iterations: 100_000,
            perturbation: T::zero(),
            rng_seed: 0,
            cutoff: None,
            dual_preference: Vec::new(),
            primal_preference: Vec::new(),
            deadline: None,
            lp: LpOptions::default(),
            trace: false,
        }
    }
}

impl<T: Scalar> SdConfig<T> {
    pub fn with_rule(drop_rule: DropRule) -> Self {
        SdConfig {
            drop_rule,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdStatus {
    Optimal,
    Cutoff,
    IterLimit,
    CycleDetected,
    TimeLimit,
}

#[derive(Clone, Debug)]
pub struct SdResult<T> {
    pub status: SdStatus,
    pub x_star: Vec<T>,
    /// `f(x_star)` under the unperturbed scenarios.
    pub value: T,
    pub best_lb: T,
    pub iterations: usize,
    pub final_set: ActiveSet<T>,
    /// Best binary vertex seen, with its unperturbed objective value.
    pub incumbent: (Vertex, T),
    pub lb_history: Vec<T>,
    /// Every distinct vertex that entered the active set, in order of arrival.
    pub generated: Vec<Vertex>,
}

/// Per-iteration snapshot passed to observers.
pub struct SdIteration<'a, T> {
    pub k: usize,
    pub active: &'a [Vertex],
    pub master: &'a MasterSolution<T>,
    pub x_hat: &'a Vertex,
    pub lower_bound: T,
    /// Vertices of `active` kept by the dropping rule (before `x_hat` is added).
    pub retained: Vec<Vertex>,
    pub dropped: usize,
}

/// `f(x) + c·(x_hat - x)`: a lower bound on `min f` over the hull when `c` is a subgradient at `x`.
pub fn lemma_lower_bound<T: Scalar>(f_xk: T, c_k: &[T], x_k: &[T], x_hat: &[T]) -> T {
    f_xk + dot(c_k, x_hat) - dot(c_k, x_k)
}

/// Runs the decomposition from `initial` (bootstrapped by one oracle call when empty).
pub fn run_sd<T: Scalar, O: LinearOracle<T> + ?Sized>(
    oracle: &O,
    scenarios: &ScenarioSet<T>,
    initial: &[Vertex],
    config: &SdConfig<T>,
) -> Result<SdResult<T>, SolveError> {
    run_sd_observed(oracle, scenarios, initial, config, &mut |_| {})
}

pub fn run_sd_observed<T: Scalar, O: LinearOracle<T> + ?Sized>(
    oracle: &O,
    scenarios: &ScenarioSet<T>,
    initial: &[Vertex],
    config: &SdConfig<T>,
    observer: &mut dyn FnMut(&SdIteration<'_, T>),
) -> Result<SdResult<T>, SolveError> {
    let n = scenarios.dimension();
    if oracle.dimension() != n {
        return Err(crate::model::ModelError::DimensionMismatch {
            expected: n,
            got: oracle.dimension(),
        }
        .into());
    }
    let (work, lb_shift) = if config.perturbation > T::zero() {
        let eps = config.perturbation;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let perturbed = scenarios.map_entries(|c| {
            let u: f64 = rng.random_range(-1.0..=1.0);
            c + eps * T::lit(u)
        });
        // |f_perturbed - f| <= eps (1 + |x|_1) on the unit cube
        (perturbed, eps * T::from_usize(n + 1).unwrap())
    } else {
        (scenarios.clone(), T::zero())
    };

    let none = Fixings::new();
    let oracle_call = |costs: &[T]| -> Result<Vertex, SolveError> {
        let v = oracle.minimize(costs, &none)?.ok_or(SolveError::InfeasibleRoot)?;
        if v.len() != n {
            return Err(SolveError::VertexDimension {
                expected: n,
                got: v.len(),
            });
        }
        Ok(v)
    };

    let mut active = ActiveSet::new();
    let mut generated = Vec::new();
    for v in initial {
        if v.len() != n {
            return Err(SolveError::VertexDimension {
                expected: n,
                got: v.len(),
            });
        }
        if active.push(v.clone(), &work) {
            generated.push(v.clone());
        }
    }
    if active.is_empty() {
        let v = oracle_call(&scenarios.get(0).costs)?;
        active.push(v.clone(), &work);
        generated.push(v);
    }

    let mut incumbent: Option<(Vertex, T)> = None;
    let offer = |v: &Vertex, incumbent: &mut Option<(Vertex, T)>| -> Result<(), SolveError> {
        let (val, _) = scenarios.evaluate_vertex(v)?;
        if incumbent.as_ref().is_none_or(|(_, best)| val < *best) {
            *incumbent = Some((v.clone(), val));
        }
        Ok(())
    };
    for v in active.vertices() {
        offer(v, &mut incumbent)?;
    }

    let mut seen: HashMap<u64, T> = HashMap::new();
    let mut lb_history = Vec::new();
    let mut best_lb = T::neg_infinity();
    let cycle_tol = T::lit(1e-9);
    let alpha_zero = T::lit(1e-10);
    let mut last: Option<MasterSolution<T>> = None;

    let finish = |status: SdStatus,
                  k: usize,
                  master: Option<MasterSolution<T>>,
                  active: ActiveSet<T>,
                  incumbent: Option<(Vertex, T)>,
                  lb_history: Vec<T>,
                  best_lb: T,
                  generated: Vec<Vertex>|
     -> Result<SdResult<T>, SolveError> {
        let x_star = match master {
            Some(ms) => ms.x,
            None => active.vertices()[0].to_reals(),
        };
        let (value, _) = scenarios.evaluate(&x_star)?;
        Ok(SdResult {
            status,
            x_star,
            value,
            best_lb,
            iterations: k,
            final_set: active,
            incumbent: incumbent.expect("active set is never empty"),
            lb_history,
            generated,
        })
    };

    for k in 1..=config.max_iterations {
        if config.deadline.is_some_and(|d| Instant::now() >= d) {
            return finish(
                SdStatus::TimeLimit,
                k - 1,
                last,
                active,
                incumbent,
                lb_history,
                best_lb,
                generated,
            );
        }
        let options = master_options(config, k, false);
        let mut ms = solve_master(&active, &work, &options)?;
        let mut x_hat = oracle_call(&ms.subgradient)?;
        offer(&x_hat, &mut incumbent)?;

        let mut cx = dot(&ms.subgradient, &ms.x);
        let mut cxh = x_hat.dot(&ms.subgradient);
        let mut optimal = cxh >= cx - config.stop_tol;
        if !optimal && active.contains(&x_hat) {
            // only reachable through round-off; certify once with Bland's rule
            ms = solve_master(&active, &work, &master_options(config, k, true))?;
            x_hat = oracle_call(&ms.subgradient)?;
            offer(&x_hat, &mut incumbent)?;
            cx = dot(&ms.subgradient, &ms.x);
            cxh = x_hat.dot(&ms.subgradient);
            optimal = true;
        }
        let lb = ms.z + cxh - cx - lb_shift;
        lb_history.push(lb);
        if lb > best_lb {
            best_lb = lb;
        }

        let mut keep = vec![true; active.len()];
        if !optimal {
            match config.drop_rule {
                DropRule::D0 => {}
                DropRule::D1 => {
                    for (kp, &a) in keep.iter_mut().zip(&ms.alpha) {
                        *kp = a > alpha_zero;
                    }
                }
                DropRule::D2 => {
                    for ((kp, &a), v) in keep.iter_mut().zip(&ms.alpha).zip(active.vertices()) {
                        *kp = !(a <= alpha_zero && ms.directional(v) >= config.d2_epsilon);
                    }
                }
            }
        }
        let retained: Vec<Vertex> = active
            .vertices()
            .iter()
            .zip(&keep)
            .filter(|(_, &kp)| kp)
            .map(|(v, _)| v.clone())
            .collect();
        let dropped = active.len() - retained.len();
        observer(&SdIteration {
            k,
            active: active.vertices(),
            master: &ms,
            x_hat: &x_hat,
            lower_bound: lb,
            retained,
            dropped,
        });
        if config.trace {
            eprintln!("sd k={k} z={} lb={} |V|={} drops={dropped}", ms.z, lb, active.len());
        }

        if optimal {
            return finish(
                SdStatus::Optimal,
                k,
                Some(ms),
                active,
                incumbent,
                lb_history,
                best_lb,
                generated,
            );
        }
        if config.cutoff.is_some_and(|c| lb >= c) {
            return finish(
                SdStatus::Cutoff,
                k,
                Some(ms),
                active,
                incumbent,
                lb_history,
                best_lb,
                generated,
            );
        }

        active.retain_mask(&keep);
        if active.push(x_hat.clone(), &work) && !generated.contains(&x_hat) {
            generated.push(x_hat);
        }
        if config.drop_rule != DropRule::D0 {
            let key = set_hash(active.vertices());
            if let Some(&prev) = seen.get(&key) {
                if ms.z >= prev - cycle_tol {
                    return finish(
                        SdStatus::CycleDetected,
                        k,
                        Some(ms),
                        active,
                        incumbent,
                        lb_history,
                        best_lb,
                        generated,
                    );
                }
            }
            seen.insert(key, ms.z);
        }
        last = Some(ms);
    }
    let k = config.max_iterations;
    finish(
        SdStatus::IterLimit,
        k,
        last,
        active,
        incumbent,
        lb_history,
        best_lb,
        generated,
    )
}

fn master_options<T: Scalar>(config: &SdConfig<T>, k: usize, bland: bool) -> MasterOptions<T> {
    let pick = |prefs: &[usize]| (!prefs.is_empty()).then(|| prefs[(k - 1) % prefs.len()]);
    let mut lp = config.lp;
    if bland {
        lp.rule = PivotRule::Bland;
    }
    MasterOptions {
        lp,
        dual_preference: pick(&config.dual_preference),
        primal_preference: pick(&config.primal_preference),
    }
}

fn set_hash(vertices: &[Vertex]) -> u64 {
    let mut sorted: Vec<&Vertex> = vertices.iter().collect();
    sorted.sort();
    let mut h = DefaultHasher::new();
    sorted.hash(&mut h);
    h.finish()
}

/// One row of the dropping-rule trace on the built-in stalling example.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub k: usize,
    pub active: Vec<Vertex>,
    pub alpha: Vec<f64>,
    pub lambda: Vec<f64>,
    pub subgradient: Vec<f64>,
    pub x_hat: Vertex,
    pub retained: Vec<Vertex>,
}

#[derive(Clone, Debug)]
pub struct Example2Trace {
    pub steps: Vec<TraceStep>,
    pub result: SdResult<f64>,
}

/// Feasible points `(0,0), (0,1), (1,0)` and scenarios `x1 - x2`, `x2 - x1`.
pub fn example1_problem() -> (ScenarioSet<f64>, crate::oracles::EnumerationOracle) {
    let u = ScenarioSet::from_costs(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).expect("static data");
    let xs = vec![Vertex::zeros(2), Vertex::from_ones(2, &[1]), Vertex::from_ones(2, &[0])];
    (u, crate::oracles::EnumerationOracle::new(2, xs))
}

/// Feasible points `(1,1), (0,1), (1,0)` and scenarios `x1`, `x2`.
pub fn example2_problem() -> (ScenarioSet<f64>, crate::oracles::EnumerationOracle) {
    let u = ScenarioSet::from_costs(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).expect("static data");
    let xs = vec![
        Vertex::from_ones(2, &[0, 1]),
        Vertex::from_ones(2, &[1]),
        Vertex::from_ones(2, &[0]),
    ];
    (u, crate::oracles::EnumerationOracle::new(2, xs))
}

/// Runs `min max{x1, x2}` from `(1,1)` with the given rule, favouring the first
/// scenario among optimal multipliers and the first vertex among optimal weights.
pub fn reproduce_example2(drop_rule: DropRule, dual_preference: usize) -> Result<Example2Trace, SolveError> {
    let (u, oracle) = example2_problem();
    let config = SdConfig {
        drop_rule,
        dual_preference: vec![dual_preference],
        primal_preference: vec![0],
        max_iterations: 20,
        ..SdConfig::default()
    };
    let mut steps = Vec::new();
    let start = [Vertex::from_ones(2, &[0, 1])];
    let result = run_sd_observed(&oracle, &u, &start, &config, &mut |it| {
        steps.push(TraceStep {
            k: it.k,
            active: it.active.to_vec(),
            alpha: it.master.alpha.clone(),
            lambda: it.master.lambda.clone(),
            subgradient: it.master.subgradient.clone(),
            x_hat: it.x_hat.clone(),
            retained: it.retained.clone(),
        });
    })?;
    Ok(Example2Trace { steps, result })
}
