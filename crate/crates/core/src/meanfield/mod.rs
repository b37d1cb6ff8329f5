//! Predictive models of the swarm dynamics: decision outcome
//! distributions, mean-field ODEs, exact stochastic simulation of the
//! population Markov chain, and exact absorption analysis for small swarms.
//!
//! All models assume a well-mixed swarm whose decision buffers are filled
//! with replacement, which makes buffer entries independent.

pub mod absorption;
pub mod decision;
pub mod ode;
pub mod ssa;

use thiserror::Error;

pub use absorption::{exact_absorption, AbsorptionResult, DEFAULT_STATE_LIMIT};
pub use decision::{decision_outcome_distribution, finite_decision_distribution};
pub use ode::{integrate, ode_rhs, MeanFieldState, MeanFieldTrajectory};
pub use ssa::ssa_run;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanFieldError {
    #[error("mean-field state drifted by {drift:e} at t = {time}; reduce dt")]
    ToleranceExceeded { time: f64, drift: f64 },
    #[error("state space for {population} agents and {options} options exceeds the limit of {limit} states")]
    StateSpaceTooLarge {
        population: usize,
        options: usize,
        limit: usize,
    },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error(transparent)]
    Problem(#[from] crate::problem::ProblemError),
    #[error(transparent)]
    Config(#[from] crate::simulator::ConfigError),
}
