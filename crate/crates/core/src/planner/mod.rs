//! Planning oracles: the optimistic extended LP, the exact occupancy LP and
//! discounted dynamic programming.

pub mod dp;
pub mod lp;
pub mod simplex;

pub use dp::{bellman_residual, greedy_action, truncated_action, value_iteration, value_iteration_from};
pub use lp::{
    build_extended_lp, exact_direction, occupancy_lp, solve_extended_lp, ExtendedLp, ExtendedLpInstance,
    LpSolution,
};
pub use simplex::{solve_lp, Constraint, ConstraintKind, LinearProgram, LpOutcome, LpStatus};
