//! Solve linear programs while keeping the constraint matrix differentially
//! private.
//!
//! The non-zero coefficients of each constraint row are shifted up and
//! perturbed with truncated Laplace noise, then clipped at their public
//! supremum. Constraints only ever tighten, so the private solution is
//! feasible for the original problem. [`accuracy`] bounds the expected loss
//! in objective before any noise is drawn, and [`cmdp`] applies the scheme
//! to safety-constrained policy synthesis.

pub mod accuracy;
pub mod cmdp;
pub mod error;
pub mod experiment;
pub mod lp;
pub mod matrix;
pub mod mechanism;
pub mod problem;

pub use accuracy::{cost_bound, hoffman_constant, inner_cone_min, xi_term, AccuracyReport, XiCase};
pub use cmdp::{Cmdp, GridConfig, Policy};
pub use error::{Error, Result};
pub use experiment::{run_sweep, ExperimentConfig, ExperimentRecord, ProblemSource};
pub use lp::{max_norm_point, phase1_feasible, solve_lp, MaxNorm, Solution, Status};
pub use matrix::Matrix;
pub use mechanism::{privatize_matrix, support_width, PrivatizedSystem, TruncLaplace};
pub use problem::{
    load_problem, load_problem_with_privacy, validate, ConstraintSystem, LinearProgram,
    PrivacyParams, ValidatedProblem,
};
