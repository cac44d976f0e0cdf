//! Oracle-based solver for min-max robust binary problems with a finite scenario set.
//!
//! The convex relaxation is solved by simplicial decomposition ([`sd`]) over a
//! master LP ([`master`]) and an exact linear oracle ([`oracles`]); the binary
//! problem by depth-first branch-and-bound ([`bnb`]). [`bench`] generates random
//! robust MST/TSP instances and runs experiments.
//!
//! Everything numeric is generic over [`Scalar`] (`f64` or `f32`); the aliases
//! below name the common concrete types.

pub mod bench;
pub mod bnb;
pub mod error;
pub mod lp;
pub mod master;
pub mod model;
pub mod oracles;
pub mod scalar;
pub mod sd;

pub use bnb::{evaluate_root, solve_bnb, BnbConfig, BnbResult, BnbStatus, RootEvaluation};
pub use error::SolveError;
pub use master::{solve_master, ActiveSet, MasterOptions, MasterSolution};
pub use model::{evaluate_f, Graph, Instance, ModelError, ProblemKind, Scenario, ScenarioSet, Vertex};
pub use oracles::{Fixings, LinearOracle, OracleError};
pub use scalar::{Scalar, Tolerances};
pub use sd::{lemma_lower_bound, run_sd, DropRule, SdConfig, SdResult, SdStatus};

pub type InstanceF64 = Instance<f64>;
pub type InstanceF32 = Instance<f32>;
pub type ScenarioSetF64 = ScenarioSet<f64>;
pub type ScenarioSetF32 = ScenarioSet<f32>;
pub type SdResultF64 = SdResult<f64>;
pub type SdResultF32 = SdResult<f32>;

pub type BnbResultF64 = BnbResult<f64>;
pub type BnbResultF32 = BnbResult<f32>;
