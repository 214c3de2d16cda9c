//! Active exploration for model estimation in tabular MDPs.
//!
//! The crate covers the estimation objective family `U_kappa` over
//! state-action occupancy measures, the confidence constructions used for
//! optimistic planning, an LP-based Frank-Wolfe explorer with its online
//! dynamic-programming surrogate, baseline explorers, and the discretized
//! benchmark environments.

pub mod environments;
pub mod error;
pub mod estimation;
pub mod explorers;
pub mod mdp;
pub mod objectives;
pub mod planner;

pub use error::{Error, Result};
