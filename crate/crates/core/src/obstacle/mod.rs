pub mod diagnostics;
mod field;
mod grid;
mod penalty;
mod problem;
pub mod refine;
mod solve;
pub mod tridiag;

pub use field::{contact_threshold, SolutionField, SolveMethod, SolveStats};
pub use grid::{GridSpec, Scheme};
pub use penalty::{penalty_beta0, penalty_beta1, PenaltyConfig};
pub use problem::{Bounds, ObstacleProblem, StepSystem};
pub use solve::{solve_lcp, solve_lcp_problem, solve_penalized, solve_penalized_problem, LcpConfig, NewtonConfig};
