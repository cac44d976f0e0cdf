//! Minimization of the max-affine objective over the convex hull of the active vertices.
//!
//! The master LP is solved in the weight form
//!
//! ```text
//! min z   s.t.  z >= sum_v cost[j][v] * alpha_v   (j = 1..m, multiplier lambda_j)
//!               sum_v alpha_v = 1,  alpha >= 0
//! ```
//!
//! so it has `m + 1` rows regardless of the problem dimension. The multipliers
//! of the scenario rows form a point of the unit simplex and
//! `sum_j lambda_j c_j` is a subgradient of `f` at `x = sum_v alpha_v v`
//! whose negative lies in the normal cone of the hull there.

use crate::error::SolveError;
use crate::lp::{lp_solve, LinearProgram, LpOptions, LpStatus, PivotRule, Relation, Sense};
use crate::model::{ScenarioSet, Vertex};
use crate::scalar::{dot, Scalar};

/// The vertex set `V` of the inner approximation, with each vertex's scenario values cached.
#[derive(Clone, Debug, Default)]
pub struct ActiveSet<T> {
    vertices: Vec<Vertex>,
    /// `cache[v][j] = c_j·v + c0_j`
    cache: Vec<Vec<T>>,
}

impl<T: Scalar> ActiveSet<T> {
    pub fn new() -> Self {
        ActiveSet {
            vertices: Vec::new(),
            cache: Vec::new(),
        }
    }

    pub fn from_vertices<'a>(vertices: impl IntoIterator<Item = &'a Vertex>, scenarios: &ScenarioSet<T>) -> Self {
        let mut set = Self::new();
        for v in vertices {
            set.push(v.clone(), scenarios);
        }
        set
    }

    /// Adds `v` unless it is already present; returns whether it was added.
    pub fn push(&mut self, v: Vertex, scenarios: &ScenarioSet<T>) -> bool {
        if self.contains(&v) {
            return false;
        }
        self.cache
            .push(scenarios.scenarios().iter().map(|s| s.value_at(&v)).collect());
        self.vertices.push(v);
        true
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        self.vertices.iter().any(|w| w == v)
    }

    /// Keeps the vertices whose flag is true, preserving order.
    pub fn retain_mask(&mut self, keep: &[bool]) {
        let mut idx = 0;
        self.vertices.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
        let mut idx = 0;
        self.cache.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    /// Scenario values of the `v`-th vertex.
    pub fn values(&self, v: usize) -> &[T] {
        &self.cache[v]
    }

    pub fn into_vertices(self) -> Vec<Vertex> {
        self.vertices
    }
}

#[derive(Clone, Debug)]
pub struct MasterOptions<T> {
    pub lp: LpOptions<T>,
    /// Among optimal multipliers, pick one maximizing the weight of this scenario.
    pub dual_preference: Option<usize>,
    /// Among optimal weights, pick one maximizing the weight of this vertex position.
    pub primal_preference: Option<usize>,
}

impl<T: Scalar> Default for MasterOptions<T> {
    fn default() -> Self {
        MasterOptions {
            lp: LpOptions::default(),
            dual_preference: None,
            primal_preference: None,
        }
    }
}

impl<T: Scalar> MasterOptions<T> {
    pub fn with_rule(rule: PivotRule) -> Self {
        MasterOptions {
            lp: LpOptions {
                rule,
                ..LpOptions::default()
            },
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct MasterSolution<T> {
    pub alpha: Vec<T>,
    pub z: T,
    pub lambda: Vec<T>,
    pub x: Vec<T>,
    pub subgradient: Vec<T>,
    pub lp_iterations: usize,
}

pub fn solve_master<T: Scalar>(
    active: &ActiveSet<T>,
    scenarios: &ScenarioSet<T>,
    options: &MasterOptions<T>,
) -> Result<MasterSolution<T>, SolveError> {
    let p = active.len();
    if p == 0 {
        return Err(SolveError::EmptyActiveSet);
    }
    let m = scenarios.len();
    let n = scenarios.dimension();
    if let Some(v) = active.vertices().iter().find(|v| v.len() != n) {
        return Err(SolveError::VertexDimension {
            expected: n,
            got: v.len(),
        });
    }

    // z = z' + shift keeps the free variable nonnegative and strictly basic
    let shift = active.cache.iter().flatten().fold(T::infinity(), |a, &b| a.min(b)) - T::one();

    let mut objective = vec![T::zero(); p + 1];
    objective[p] = T::one();
    let mut lp = LinearProgram::new(Sense::Minimize, objective);
    for j in 0..m {
        let mut row: Vec<T> = (0..p).map(|v| -active.values(v)[j]).collect();
        row.push(T::one());
        lp.add_row(row, Relation::Ge, -shift);
    }
    let mut simplex_row = vec![T::one(); p];
    simplex_row.push(T::zero());
    lp.add_row(simplex_row, Relation::Eq, T::one());

    let mut sol = lp_solve(&lp, &options.lp)?;
    let mut iterations = sol.iterations;
    if sol.status == LpStatus::Stalled && options.lp.rule != PivotRule::Bland {
        let bland = LpOptions {
            rule: PivotRule::Bland,
            ..options.lp
        };
        sol = lp_solve(&lp, &bland)?;
        iterations += sol.iterations;
    }
    if sol.status != LpStatus::Optimal {
        return Err(SolveError::Master {
            status: sol.status,
            vertices: p,
            scenarios: m,
            iterations,
        });
    }
    let z_lp = sol.primal[p] + shift;
    let mut alpha = normalized(sol.primal[..p].to_vec());
    let mut lambda = normalized(sol.dual[..m].to_vec());

    let slack = options.lp.tolerances.feasibility * (T::one() + z_lp.abs());
    if let Some(pref) = options.primal_preference.filter(|&q| q < p) {
        if let Some(a) = preferred_weights(active, m, z_lp + slack, pref, &options.lp) {
            alpha = a;
        }
    }
    if let Some(pref) = options.dual_preference.filter(|&j| j < m) {
        if let Some(l) = preferred_multipliers(active, m, z_lp - slack, pref, &options.lp) {
            lambda = l;
        }
    }

    let mut x = vec![T::zero(); n];
    for (v, &a) in active.vertices().iter().zip(&alpha) {
        if a != T::zero() {
            for i in v.ones() {
                x[i] += a;
            }
        }
    }
    let mut subgradient = vec![T::zero(); n];
    for (s, &l) in scenarios.scenarios().iter().zip(&lambda) {
        if l != T::zero() {
            for (g, &c) in subgradient.iter_mut().zip(&s.costs) {
                *g += l * c;
            }
        }
    }
    let (z, _) = scenarios.evaluate(&x)?;
    Ok(MasterSolution {
        alpha,
        z,
        lambda,
        x,
        subgradient,
        lp_iterations: iterations,
    })
}

fn normalized<T: Scalar>(mut w: Vec<T>) -> Vec<T> {
    for a in &mut w {
        *a = a.max(T::zero());
    }
    let total: T = w.iter().copied().sum();
    if total > T::zero() {
        for a in &mut w {
            *a /= total;
        }
    }
    w
}

/// max alpha_pref over the optimal face `{alpha in simplex : cost_j·alpha <= z* for all j}`.
fn preferred_weights<T: Scalar>(
    active: &ActiveSet<T>,
    m: usize,
    bound: T,
    pref: usize,
    lp_options: &LpOptions<T>,
) -> Option<Vec<T>> {
    let p = active.len();
    let mut objective = vec![T::zero(); p];
    objective[pref] = T::one();
    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    for j in 0..m {
        lp.add_row((0..p).map(|v| active.values(v)[j]).collect(), Relation::Le, bound);
    }
    lp.add_row(vec![T::one(); p], Relation::Eq, T::one());
    let sol = lp_solve(&lp, lp_options).ok()?;
    (sol.status == LpStatus::Optimal).then(|| normalized(sol.primal))
}

/// max lambda_pref over the optimal dual face `{lambda in simplex : lambda·cost^v >= z* for all v}`.
fn preferred_multipliers<T: Scalar>(
    active: &ActiveSet<T>,
    m: usize,
    bound: T,
    pref: usize,
    lp_options: &LpOptions<T>,
) -> Option<Vec<T>> {
    let mut objective = vec![T::zero(); m];
    objective[pref] = T::one();
    let mut lp = LinearProgram::new(Sense::Maximize, objective);
    for v in 0..active.len() {
        lp.add_row(active.values(v).to_vec(), Relation::Ge, bound);
    }
    lp.add_row(vec![T::one(); m], Relation::Eq, T::one());
    let sol = lp_solve(&lp, lp_options).ok()?;
    (sol.status == LpStatus::Optimal).then(|| normalized(sol.primal))
}

impl<T: Scalar> MasterSolution<T> {
    /// `subgradient·(v - x)` for a binary `v`.
    pub fn directional(&self, v: &Vertex) -> T {
        v.dot(&self.subgradient) - dot(&self.subgradient, &self.x)
    }
}
