//! Stable principal component pursuit.
//!
//! Splits an observed matrix `D` into a low-rank part `X` and a sparse part `S`
//! by solving
//!
//! ```text
//! minimize ||X||_* + xi * ||S||_1   subject to   ||X + S - D||_F <= delta
//! ```
//!
//! Four first-order methods are provided (see [`solvers`]): a smoothed
//! Nesterov gradient method, a partially smoothed proximal gradient method,
//! an alternating linearization method with skipping steps, and a non-smooth
//! augmented Lagrangian method (NSA) that works on the exact objective. All of
//! them reduce to the closed-form subproblem solvers in [`subproblem`].
//!
//! [`instance`] generates seeded random test instances, [`bench`] evaluates
//! recovered decompositions against ground truth and renders summary tables,
//! and [`io`] reads and writes matrices, PGM frame sequences and suite
//! configuration files.

pub mod bench;
pub mod error;
pub mod instance;
pub mod io;
pub mod model;
pub mod prox;
mod quartic;
pub mod solvers;
pub mod subproblem;

pub use error::{Result, SpcpError};
pub use model::{
    Algorithm, GroundTruth, Matrix, RhoGrowth, SolveStatus, SolverConfig, SpcpProblem,
    SpcpSolution, SvdMode,
};
pub use solvers::{solve, IterStats, SolveOutput};
