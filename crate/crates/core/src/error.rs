use thiserror::Error;

use crate::lp::{LpError, LpStatus};
use crate::model::ModelError;
use crate::oracles::OracleError;

/// Failure of a master solve, a decomposition run, or a tree search.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(
        "master LP ended with status {status:?} ({vertices} vertices, {scenarios} scenarios, {iterations} pivots)"
    )]
    Master {
        status: LpStatus,
        vertices: usize,
        scenarios: usize,
        iterations: usize,
    },
    #[error("active set is empty")]
    EmptyActiveSet,
    #[error("oracle reports the root problem infeasible")]
    InfeasibleRoot,
    #[error("oracle reports an infeasible node at depth {depth} ({fixed} fixings); branching invariant violated")]
    InfeasibleNode { depth: usize, fixed: usize },
    #[error("oracle returned a vertex of dimension {got}, expected {expected}")]
    VertexDimension { expected: usize, got: usize },
    #[error("oracle does not support variable fixings")]
    FixingsUnsupported,
}
