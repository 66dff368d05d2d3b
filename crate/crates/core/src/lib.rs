//! Inertial gradient dynamics with vanishing damping `ẍ + (α/t)ẋ + ∇f(x) = 0`,
//! their energy functions, and the matching inertial forward-backward solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod formats;
pub mod integrator;
pub mod linalg;
pub mod lyapunov;
pub mod oracle;
pub mod problems;
pub mod solver;

pub use error::{Error, Result};
pub use integrator::{integrate, IntegratorConfig, State, Trajectory};
pub use problems::{catalog, CompositeProblem, ProblemSpec};
pub use solver::{run, SolverConfig};
