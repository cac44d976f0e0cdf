//! Dense two-phase primal simplex.
//!
//! Variables are nonnegative; each row carries its own relation. The entering
//! column is chosen by Dantzig's rule until a run of degenerate pivots longer
//! than `2 * (rows + cols)` is observed, after which Bland's rule takes over
//! for the rest of the phase. Duals are read off the reduced costs of the
//! columns that formed the initial identity basis.

use thiserror::Error;

use crate::scalar::{Scalar, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Most negative reduced cost, falling back to Bland on degenerate stalls.
    #[default]
    Dantzig,
    /// Smallest-index rule from the first pivot.
    Bland,
}

#[derive(Clone, Copy, Debug)]
pub struct LpOptions<T> {
    pub rule: PivotRule,
    /// Zero selects a limit proportional to the tableau size.
    pub max_iterations: usize,
    pub tolerances: Tolerances<T>,
}

impl<T: Scalar> Default for LpOptions<T> {
    fn default() -> Self {
        LpOptions {
            rule: PivotRule::Dantzig,
            max_iterations: 0,
            tolerances: T::tolerances(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram<T> {
    pub sense: Sense,
    pub objective: Vec<T>,
    pub rows: Vec<Vec<T>>,
    pub relations: Vec<Relation>,
    pub rhs: Vec<T>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(sense: Sense, objective: Vec<T>) -> Self {
        LinearProgram {
            sense,
            objective,
            rows: Vec::new(),
            relations: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<T>, relation: Relation, rhs: T) -> &mut Self {
        self.rows.push(coeffs);
        self.relations.push(relation);
        self.rhs.push(rhs);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration limit hit; primal and dual describe the last basis.
    Stalled,
}

/// Result of [`lp_solve`].
///
/// Dual signs follow the usual convention for the stated sense: when
/// minimizing, a `Ge` row has a nonnegative multiplier and a `Le` row a
/// nonpositive one (reversed when maximizing), and at optimality
/// `objective == rhs · dual`.
#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub primal: Vec<T>,
    pub dual: Vec<T>,
    pub objective: T,
    pub iterations: usize,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("row {row} has {got} coefficients, expected {expected}")]
    RowLength { row: usize, expected: usize, got: usize },
    #[error("relation/rhs count does not match row count")]
    RowCount,
    #[error("non-finite coefficient in linear program")]
    NonFinite,
}

pub fn lp_solve<T: Scalar>(lp: &LinearProgram<T>, options: &LpOptions<T>) -> Result<LpSolution<T>, LpError> {
    validate(lp)?;
    let mut tab = Tableau::build(lp, options);
    let mut iterations = 0;
    let limit = if options.max_iterations == 0 {
        50 * (tab.m + tab.width) + 1000
    } else {
        options.max_iterations
    };

    if tab.art_start < tab.width {
        tab.set_phase_one_objective();
        match tab.run(tab.width, &mut iterations, limit) {
            PhaseEnd::Stalled => return Ok(tab.solution(lp, LpStatus::Stalled, iterations)),
            // phase one is bounded below by zero
            PhaseEnd::Unbounded | PhaseEnd::Optimal => {}
        }
        let infeasibility = -tab.obj[tab.width];
        let scale = tab.rhs_scale();
        if infeasibility > options.tolerances.feasibility * scale {
            return Ok(tab.solution(lp, LpStatus::Infeasible, iterations));
        }
        tab.drive_out_artificials();
    }

    tab.set_phase_two_objective();
    let status = match tab.run(tab.art_start, &mut iterations, limit) {
        PhaseEnd::Optimal => LpStatus::Optimal,
        PhaseEnd::Unbounded => LpStatus::Unbounded,
        PhaseEnd::Stalled => LpStatus::Stalled,
    };
    Ok(tab.solution(lp, status, iterations))
}

fn validate<T: Scalar>(lp: &LinearProgram<T>) -> Result<(), LpError> {
    if lp.relations.len() != lp.rows.len() || lp.rhs.len() != lp.rows.len() {
        return Err(LpError::RowCount);
    }
    let n = lp.num_vars();
    for (row, coeffs) in lp.rows.iter().enumerate() {
        if coeffs.len() != n {
            return Err(LpError::RowLength {
                row,
                expected: n,
                got: coeffs.len(),
            });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite);
        }
    }
    if lp.objective.iter().chain(&lp.rhs).any(|c| !c.is_finite()) {
        return Err(LpError::NonFinite);
    }
    Ok(())
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Stalled,
}

struct Tableau<T> {
    m: usize,
    n: usize,
    /// Total column count (structural + slack/surplus + artificial).
    width: usize,
    art_start: usize,
    /// Row-major `m x (width + 1)`; the last column is the right-hand side.
    data: Vec<T>,
    /// Reduced costs; the last entry holds `-(current objective)`.
    obj: Vec<T>,
    basis: Vec<usize>,
    /// Column that was the identity basis column of each row.
    identity: Vec<usize>,
    negated: Vec<bool>,
    /// Phase-two costs in the minimization form.
    cost: Vec<T>,
    tol: Tolerances<T>,
    bland: bool,
    degenerate_streak: usize,
}

impl<T: Scalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>, options: &LpOptions<T>) -> Self {
        let m = lp.num_rows();
        let n = lp.num_vars();
        let mut negated = vec![false; m];
        let mut relations = lp.relations.clone();
        for i in 0..m {
            if lp.rhs[i] < T::zero() {
                negated[i] = true;
                relations[i] = match relations[i] {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
            }
        }
        let n_aux = relations.iter().filter(|r| **r != Relation::Eq).count();
        let n_art = relations.iter().filter(|r| **r != Relation::Le).count();
        let art_start = n + n_aux;
        let width = art_start + n_art;
        let stride = width + 1;
        let mut data = vec![T::zero(); m * stride];
        let mut basis = vec![0; m];
        let mut identity = vec![0; m];
        let (mut aux, mut art) = (n, art_start);
        for i in 0..m {
            let sign = if negated[i] { -T::one() } else { T::one() };
            let row = &mut data[i * stride..(i + 1) * stride];
            for (dst, &src) in row.iter_mut().zip(&lp.rows[i]) {
                *dst = sign * src;
            }
            row[width] = sign * lp.rhs[i];
            match relations[i] {
                Relation::Le => {
                    row[aux] = T::one();
                    basis[i] = aux;
                    identity[i] = aux;
                    aux += 1;
                }
                Relation::Ge => {
                    row[aux] = -T::one();
                    aux += 1;
                    row[art] = T::one();
                    basis[i] = art;
                    identity[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = T::one();
                    basis[i] = art;
                    identity[i] = art;
                    art += 1;
                }
            }
        }
        let mut cost = vec![T::zero(); width];
        for (j, &c) in lp.objective.iter().enumerate() {
            cost[j] = match lp.sense {
                Sense::Minimize => c,
                Sense::Maximize => -c,
            };
        }
        let bland = options.rule == PivotRule::Bland;
        Tableau {
            m,
            n,
            width,
            art_start,
            data,
            obj: vec![T::zero(); stride],
            basis,
            identity,
            negated,
            cost,
            tol: options.tolerances,
            bland,
            degenerate_streak: 0,
        }
    }

    fn stride(&self) -> usize {
        self.width + 1
    }

    fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.stride() + j]
    }

    fn rhs(&self, i: usize) -> T {
        self.at(i, self.width)
    }

    fn rhs_scale(&self) -> T {
        (0..self.m).fold(T::one(), |acc, i| acc.max(self.rhs(i).abs()))
    }

    fn load_objective(&mut self, cost: &[T]) {
        let stride = self.stride();
        self.obj[..self.width].copy_from_slice(cost);
        self.obj[self.width] = T::zero();
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != T::zero() {
                let row = &self.data[i * stride..(i + 1) * stride];
                for (o, &a) in self.obj.iter_mut().zip(row) {
                    *o -= cb * a;
                }
            }
        }
    }

    fn set_phase_one_objective(&mut self) {
        let mut cost = vec![T::zero(); self.width];
        for c in &mut cost[self.art_start..] {
            *c = T::one();
        }
        self.load_objective(&cost);
    }

    fn set_phase_two_objective(&mut self) {
        let cost = self.cost.clone();
        self.load_objective(&cost);
        self.degenerate_streak = 0;
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let stride = self.stride();
        let p = self.at(r, e);
        {
            let row = &mut self.data[r * stride..(r + 1) * stride];
            for a in row.iter_mut() {
                *a /= p;
            }
            row[e] = T::one();
        }
        let (before, rest) = self.data.split_at_mut(r * stride);
        let (pivot_row, after) = rest.split_at_mut(stride);
        for row in before.chunks_exact_mut(stride).chain(after.chunks_exact_mut(stride)) {
            let f = row[e];
            if f != T::zero() {
                for (a, &b) in row.iter_mut().zip(pivot_row.iter()) {
                    *a -= f * b;
                }
                row[e] = T::zero();
            }
        }
        let f = self.obj[e];
        if f != T::zero() {
            for (a, &b) in self.obj.iter_mut().zip(pivot_row.iter()) {
                *a -= f * b;
            }
            self.obj[e] = T::zero();
        }
        self.basis[r] = e;
    }

    fn entering(&self, allowed: usize) -> Option<usize> {
        let threshold = -self.tol.feasibility;
        if self.bland {
            (0..allowed).find(|&j| self.obj[j] < threshold)
        } else {
            let mut best: Option<(usize, T)> = None;
            for j in 0..allowed {
                let d = self.obj[j];
                if d < threshold && best.is_none_or(|(_, b)| d < b) {
                    best = Some((j, d));
                }
            }
            best.map(|(j, _)| j)
        }
    }

    fn leaving(&self, e: usize) -> Option<(usize, T)> {
        let mut best: Option<(usize, T, T)> = None;
        for i in 0..self.m {
            let a = self.at(i, e);
            if a <= self.tol.pivot {
                continue;
            }
            let ratio = self.rhs(i).max(T::zero()) / a;
            best = match best {
                None => Some((i, ratio, a)),
                Some((bi, br, ba)) => {
                    if ratio < br - self.tol.feasibility {
                        Some((i, ratio, a))
                    } else if ratio <= br + self.tol.feasibility {
                        let better = if self.bland {
                            self.basis[i] < self.basis[bi]
                        } else {
                            a > ba
                        };
                        if better {
                            Some((i, ratio, a))
                        } else {
                            Some((bi, br, ba))
                        }
                    } else {
                        Some((bi, br, ba))
                    }
                }
            };
        }
        best.map(|(i, r, _)| (i, r))
    }

    fn run(&mut self, allowed: usize, iterations: &mut usize, limit: usize) -> PhaseEnd {
        let streak_limit = 2 * (self.m + self.width);
        loop {
            let Some(e) = self.entering(allowed) else {
                return PhaseEnd::Optimal;
            };
            if *iterations >= limit {
                return PhaseEnd::Stalled;
            }
            let Some((r, ratio)) = self.leaving(e) else {
                return PhaseEnd::Unbounded;
            };
            if ratio <= self.tol.feasibility {
                self.degenerate_streak += 1;
                if self.degenerate_streak > streak_limit {
                    self.bland = true;
                }
            } else {
                self.degenerate_streak = 0;
            }
            self.pivot(r, e);
            *iterations += 1;
        }
    }

    fn drive_out_artificials(&mut self) {
        for i in 0..self.m {
            if self.basis[i] < self.art_start {
                continue;
            }
            let mut best: Option<(usize, T)> = None;
            for j in 0..self.art_start {
                let a = self.at(i, j).abs();
                if a > self.tol.pivot && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                let w = self.width;
                let stride = self.stride();
                self.data[i * stride + w] = T::zero();
                self.pivot(i, j);
            }
            // otherwise the row is redundant and its artificial stays basic at zero
        }
    }

    fn solution(&self, lp: &LinearProgram<T>, status: LpStatus, iterations: usize) -> LpSolution<T> {
        let mut primal = vec![T::zero(); self.n];
        for i in 0..self.m {
            let b = self.basis[i];
            if b < self.n {
                primal[b] = self.rhs(i).max(T::zero());
            }
        }
        let objective = crate::scalar::dot(&lp.objective, &primal);
        let dual = match status {
            LpStatus::Optimal | LpStatus::Stalled => (0..self.m)
                .map(|i| {
                    // y'_i = c_id - d_id with zero cost on identity columns
                    let mut y = -self.obj[self.identity[i]];
                    if self.negated[i] {
                        y = -y;
                    }
                    if lp.sense == Sense::Maximize {
                        y = -y;
                    }
                    y
                })
                .collect(),
            _ => Vec::new(),
        };
        LpSolution {
            status,
            primal,
            dual,
            objective,
            iterations,
        }
    }
}
