//! Best-of-n collective decision making for robot swarms.
//!
//! * [`problem`] describes a best-of-n instance and which options are best.
//! * [`scenarios`] builds instances for shortest-path, site-selection and
//!   collective-perception settings.
//! * [`strategy`] is the per-agent exploration/dissemination state machine
//!   with voter and majority decision rules.
//! * [`simulator`] runs a swarm of agents event by event.
//! * [`meanfield`] holds the predictive models used to cross-check it.
//! * [`experiment`] loads experiment files and writes result files; the
//!   `bestofn` binary is a thin wrapper around it.

pub mod experiment;
pub mod meanfield;
pub mod problem;
pub mod rng;
pub mod scenarios;
pub mod simulator;
pub mod strategy;

pub use problem::{best_options, classify_variant, Interaction, OptionId, ProblemInstance, Variant};
pub use simulator::{batch, run, BatchMetrics, Engine, RunRecord, SwarmConfig};
pub use strategy::DecisionRule;
