//! Event-driven agent-based simulation of the swarm in a well-mixed arena.
//!
//! Every agent has exactly one pending event: the end of its current phase.
//! When a dissemination phase ends, the agent hears a random sample of the
//! other agents that are disseminating at that moment, then decides.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meanfield::ssa;
use crate::problem::{OptionId, ProblemInstance};
use crate::rng::{self, SwarmRng};
use crate::strategy::{
    measure_quality, sample_dissemination_duration, sample_exploration_duration, step_agent, AgentState,
    DecisionRule, OpinionBuffer, Phase, StrategyError, StrategyParams,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// How agents are distributed over phases at time zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPhase {
    /// Every agent starts by exploring its initial opinion.
    #[default]
    Exploration,
    /// Each agent of opinion `i` independently starts disseminating with
    /// probability `g q_i / (c_i + g q_i)`, its long-run share of time in
    /// dissemination.
    Stationary,
}

/// Parameters of one swarm run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmConfig {
    /// Number of agents `N`.
    #[serde(default = "defaults::population")]
    pub population: usize,
    /// Dissemination gain `g`.
    #[serde(default = "defaults::gain")]
    pub gain: f64,
    /// Opinion buffer capacity `G`.
    #[serde(default = "defaults::buffer_capacity")]
    pub buffer_capacity: usize,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "defaults::q_min")]
    pub q_min: f64,
    #[serde(default = "defaults::rule")]
    pub rule: DecisionRule,
    /// Initial opinion fractions; uniform over options when absent.
    #[serde(default)]
    pub initial_opinions: Option<Vec<f64>>,
    #[serde(default)]
    pub initial_phase: InitialPhase,
    /// Consensus threshold `tau` in `(0.5, 1]`.
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    #[serde(default = "defaults::max_time")]
    pub max_time: f64,
    #[serde(default)]
    pub seed: u64,
    /// Draw buffer entries with replacement instead of from distinct agents.
    #[serde(default)]
    pub with_replacement: bool,
    /// Sampling period of the recorded trajectory. Only the initial and
    /// final states are recorded when absent.
    #[serde(default)]
    pub trajectory_interval: Option<f64>,
}

pub(crate) mod defaults {
    use crate::strategy::DecisionRule;

    pub fn population() -> usize {
        100
    }
    pub fn gain() -> f64 {
        10.0
    }
    pub fn buffer_capacity() -> usize {
        3
    }
    pub fn q_min() -> f64 {
        0.01
    }
    pub fn rule() -> DecisionRule {
        DecisionRule::Voter
    }
    pub fn tau() -> f64 {
        1.0
    }
    pub fn max_time() -> f64 {
        1e5
    }
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            population: defaults::population(),
            gain: defaults::gain(),
            buffer_capacity: defaults::buffer_capacity(),
            sigma: 0.0,
            q_min: defaults::q_min(),
            rule: defaults::rule(),
            initial_opinions: None,
            initial_phase: InitialPhase::Exploration,
            tau: defaults::tau(),
            max_time: defaults::max_time(),
            seed: 0,
            with_replacement: false,
            trajectory_interval: None,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self, instance: &ProblemInstance) -> Result<(), ConfigError> {
        if self.population < 2 {
            return Err(invalid("population", "need at least 2 agents"));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(invalid("gain", "must be positive"));
        }
        if self.buffer_capacity < 1 {
            return Err(invalid("buffer_capacity", "must be at least 1"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", "must be non-negative"));
        }
        if !(self.q_min > 0.0 && self.q_min < 1.0) {
            return Err(invalid("q_min", "must lie in (0, 1)"));
        }
        if !(self.tau > 0.5 && self.tau <= 1.0) {
            return Err(invalid("tau", "must lie in (0.5, 1]"));
        }
        if !(self.max_time > 0.0) {
            return Err(invalid("max_time", "must be positive"));
        }
        if let Some(dt) = self.trajectory_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(invalid("trajectory_interval", "must be positive"));
            }
        }
        if let Some(f) = &self.initial_opinions {
            if f.len() != instance.n() {
                return Err(invalid(
                    "initial_opinions",
                    format!("has {} entries for {} options", f.len(), instance.n()),
                ));
            }
            if f.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err(invalid("initial_opinions", "fractions must be non-negative"));
            }
            let total: f64 = f.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(invalid("initial_opinions", format!("fractions sum to {total}, expected 1")));
            }
        }
        Ok(())
    }

    /// Initial fractions with the uniform default applied.
    pub fn initial_fractions(&self, n: usize) -> Vec<f64> {
        self.initial_opinions.clone().unwrap_or_else(|| vec![1.0 / n as f64; n])
    }

    /// Initial number of agents per option (largest-remainder rounding,
    /// ties to the lower option index).
    pub fn initial_counts(&self, n: usize) -> Vec<u32> {
        apportion(&self.initial_fractions(n), self.population)
    }

    pub fn strategy_params(&self) -> StrategyParams {
        StrategyParams {
            gain: self.gain,
            sigma: self.sigma,
            q_min: self.q_min,
            rule: self.rule,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SwarmConfig { seed, ..self.clone() }
    }
}

/// Splits `total` into integer parts proportional to `fractions`.
pub fn apportion(fractions: &[f64], total: usize) -> Vec<u32> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts: Vec<u32> = exact.iter().map(|x| x.floor() as u32).collect();
    let assigned: usize = counts.iter().map(|&c| c as usize).sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Minimum number of agents that must share an opinion for a decision.
pub fn consensus_threshold(tau: f64, population: usize) -> u32 {
    (tau * population as f64 - 1e-9).ceil().max(1.0) as u32
}

/// Returns the option held by at least `ceil(tau N)` agents, if any.
pub fn detect_consensus(counts: &[u32], tau: f64, population: usize) -> Option<OptionId> {
    let threshold = consensus_threshold(tau, population);
    counts.iter().position(|&c| c >= threshold).map(OptionId::from_index)
}

/// Sampled time series of compartment counts. Each row holds
/// `E_1..E_n, D_1..D_n`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub n_options: usize,
    pub times: Vec<f64>,
    pub counts: Vec<u32>,
}

impl Trajectory {
    pub fn new(n_options: usize) -> Self {
        Trajectory {
            n_options,
            ..Default::default()
        }
    }

    pub fn push(&mut self, time: f64, row: &[u32]) {
        debug_assert_eq!(row.len(), 2 * self.n_options);
        self.times.push(time);
        self.counts.extend_from_slice(row);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, k: usize) -> &[u32] {
        let w = 2 * self.n_options;
        &self.counts[k * w..(k + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, &[u32])> {
        self.times.iter().copied().zip(self.counts.chunks_exact(2 * self.n_options))
    }

    /// Opinion counts (both phases) in row `k`.
    pub fn opinion_counts(&self, k: usize) -> Vec<u32> {
        let row = self.row(k);
        let n = self.n_options;
        (0..n).map(|i| row[i] + row[n + i]).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub decided: bool,
    pub winner: Option<OptionId>,
    /// Time of the decision, or the time the run was stopped.
    pub decision_time: f64,
    pub events: u64,
    pub trajectory: Trajectory,
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    seq: u64,
    agent: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so that `BinaryHeap` pops the earliest event first.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// Samples trajectory rows on a fixed grid.
pub(crate) struct Sampler {
    interval: Option<f64>,
    next_index: u64,
}

impl Sampler {
    pub(crate) fn new(interval: Option<f64>) -> Self {
        Sampler { interval, next_index: 1 }
    }

    /// Records the pre-event state at every grid time strictly before `t`
    /// (and not after `limit`).
    pub(crate) fn fill_until(&mut self, t: f64, limit: f64, row: &[u32], trajectory: &mut Trajectory) {
        if let Some(dt) = self.interval {
            loop {
                let grid = self.next_index as f64 * dt;
                if grid >= t || grid > limit {
                    break;
                }
                trajectory.push(grid, row);
                self.next_index += 1;
            }
        }
    }
}

/// Callback invoked with the initial state and after every processed event,
/// with the current time and the compartment counts.
pub type Observer<'a> = &'a mut dyn FnMut(f64, &[u32]);

struct Swarm<'a> {
    instance: &'a ProblemInstance,
    config: &'a SwarmConfig,
    params: StrategyParams,
    agents: Vec<AgentState>,
    disseminating: Vec<usize>,
    slot: Vec<usize>,
    counts: Vec<u32>,
    queue: BinaryHeap<Event>,
    seq: u64,
}

const NOT_DISSEMINATING: usize = usize::MAX;

impl<'a> Swarm<'a> {
    fn new(instance: &'a ProblemInstance, config: &'a SwarmConfig, rng: &mut SwarmRng) -> Result<Self, StrategyError> {
        let n = instance.n();
        let population = config.population;
        let mut swarm = Swarm {
            instance,
            config,
            params: config.strategy_params(),
            agents: Vec::with_capacity(population),
            disseminating: Vec::with_capacity(population),
            slot: vec![NOT_DISSEMINATING; population],
            counts: vec![0; 2 * n],
            queue: BinaryHeap::with_capacity(population),
            seq: 0,
        };
        let initial = config.initial_counts(n);
        let mut id = 0;
        for (i, &count) in initial.iter().enumerate() {
            let option = OptionId::from_index(i);
            let profile = instance.option(option);
            let p_dissem = profile.quality * config.gain / (profile.cost + profile.quality * config.gain);
            for _ in 0..count {
                let start_disseminating =
                    config.initial_phase == InitialPhase::Stationary && rng.random::<f64>() < p_dissem;
                let agent = if start_disseminating {
                    let estimate = measure_quality(option, instance, 0.0, config.sigma, config.q_min, rng);
                    AgentState {
                        id,
                        phase: Phase::Dissemination(option),
                        phase_ends_at: sample_dissemination_duration(estimate, config.gain, rng)?,
                        quality_estimate: estimate,
                        buffer: OpinionBuffer::new(config.buffer_capacity),
                    }
                } else {
                    AgentState {
                        id,
                        phase: Phase::Exploration(option),
                        phase_ends_at: sample_exploration_duration(option, instance, rng),
                        quality_estimate: 0.0,
                        buffer: OpinionBuffer::new(config.buffer_capacity),
                    }
                };
                swarm.enter(&agent);
                swarm.schedule(&agent);
                swarm.agents.push(agent);
                id += 1;
            }
        }
        Ok(swarm)
    }

    fn compartment(&self, phase: Phase) -> usize {
        match phase {
            Phase::Exploration(o) => o.index(),
            Phase::Dissemination(o) => self.instance.n() + o.index(),
        }
    }

    fn enter(&mut self, agent: &AgentState) {
        let c = self.compartment(agent.phase);
        self.counts[c] += 1;
        if agent.phase.is_dissemination() {
            self.slot[agent.id] = self.disseminating.len();
            self.disseminating.push(agent.id);
        }
    }

    fn leave(&mut self, agent: &AgentState) {
        let c = self.compartment(agent.phase);
        self.counts[c] -= 1;
        if agent.phase.is_dissemination() {
            let s = self.slot[agent.id];
            self.disseminating.swap_remove(s);
            if let Some(&moved) = self.disseminating.get(s) {
                self.slot[moved] = s;
            }
            self.slot[agent.id] = NOT_DISSEMINATING;
        }
    }

    fn schedule(&mut self, agent: &AgentState) {
        self.queue.push(Event {
            time: agent.phase_ends_at,
            seq: self.seq,
            agent: agent.id,
        });
        self.seq += 1;
    }

    /// Fills the agent's buffer with opinions of other disseminating agents.
    fn listen(&mut self, id: usize, rng: &mut SwarmRng) {
        let own_slot = self.slot[id];
        let others = self.disseminating.len() - 1;
        if others == 0 {
            return;
        }
        let capacity = self.config.buffer_capacity;
        let opinion_at = |k: usize, this: &Self| {
            let k = if k >= own_slot { k + 1 } else { k };
            this.agents[this.disseminating[k]].opinion()
        };
        if self.config.with_replacement {
            for _ in 0..capacity {
                let heard = opinion_at(rng.random_range(0..others), self);
                self.agents[id].buffer.record(heard);
            }
        } else {
            let picks = index::sample(rng, others, capacity.min(others));
            for k in picks.iter() {
                let heard = opinion_at(k, self);
                self.agents[id].buffer.record(heard);
            }
        }
    }

    fn opinion_counts(&self) -> Vec<u32> {
        let n = self.instance.n();
        (0..n).map(|i| self.counts[i] + self.counts[n + i]).collect()
    }
}

/// Runs one simulation with `config.seed`.
pub fn run(config: &SwarmConfig, instance: &ProblemInstance) -> Result<RunRecord, SimulationError> {
    run_observed(config, instance, &mut |_, _| {})
}

/// Like [`run`], calling `observer` after every event.
pub fn run_observed(
    config: &SwarmConfig,
    instance: &ProblemInstance,
    observer: Observer<'_>,
) -> Result<RunRecord, SimulationError> {
    instance.validate()?;
    config.validate(instance)?;
    let mut rng = rng::seeded(config.seed);
    let mut swarm = Swarm::new(instance, config, &mut rng)?;
    let population = config.population;
    let mut trajectory = Trajectory::new(instance.n());
    let mut sampler = Sampler::new(config.trajectory_interval);
    trajectory.push(0.0, &swarm.counts);
    observer(0.0, &swarm.counts);

    let mut record = RunRecord {
        seed: config.seed,
        decided: false,
        winner: None,
        decision_time: config.max_time,
        events: 0,
        trajectory: Trajectory::default(),
    };

    if let Some(winner) = detect_consensus(&swarm.opinion_counts(), config.tau, population) {
        record.decided = true;
        record.winner = Some(winner);
        record.decision_time = 0.0;
        record.trajectory = trajectory;
        return Ok(record);
    }

    while let Some(event) = swarm.queue.pop() {
        if event.time > config.max_time {
            break;
        }
        sampler.fill_until(event.time, config.max_time, &swarm.counts, &mut trajectory);
        let id = event.agent;
        let placeholder = AgentState {
            id,
            phase: swarm.agents[id].phase,
            phase_ends_at: 0.0,
            quality_estimate: 0.0,
            buffer: OpinionBuffer::new(1),
        };
        let was_disseminating = swarm.agents[id].phase.is_dissemination();
        if was_disseminating {
            swarm.listen(id, &mut rng);
        }
        let agent = std::mem::replace(&mut swarm.agents[id], placeholder);
        swarm.leave(&agent);
        let agent = step_agent(agent, event.time, instance, &swarm.params, &mut rng)?;
        swarm.enter(&agent);
        swarm.schedule(&agent);
        swarm.agents[id] = agent;
        record.events += 1;
        observer(event.time, &swarm.counts);

        if was_disseminating {
            if let Some(winner) = detect_consensus(&swarm.opinion_counts(), config.tau, population) {
                record.decided = true;
                record.winner = Some(winner);
                record.decision_time = event.time;
                break;
            }
        }
    }

    if !record.decided {
        sampler.fill_until(f64::INFINITY, config.max_time, &swarm.counts, &mut trajectory);
    }
    trajectory.push(record.decision_time, &swarm.counts);
    record.trajectory = trajectory;
    Ok(record)
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Problem(#[from] crate::problem::ProblemError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// Which stochastic model produces the runs of a batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// The event-driven agent-based simulator.
    #[default]
    Agents,
    /// Exact stochastic simulation of the population-level Markov chain.
    Ssa,
}

impl Engine {
    pub fn run(self, config: &SwarmConfig, instance: &ProblemInstance) -> Result<RunRecord, SimulationError> {
        match self {
            Engine::Agents => run(config, instance),
            Engine::Ssa => {
                instance.validate()?;
                config.validate(instance)?;
                let mut rng = rng::seeded(config.seed);
                Ok(ssa::ssa_run(instance, config, &mut rng))
            }
        }
    }
}

/// Aggregate statistics over a batch of runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchMetrics {
    pub repetitions: usize,
    pub decided: usize,
    pub non_decision_rate: f64,
    pub wins: Vec<usize>,
    /// `wins_i / decided`; all zeros when no run decided.
    pub exit_probability: Vec<f64>,
    /// Binomial standard errors of `exit_probability`.
    pub exit_probability_se: Vec<f64>,
    pub mean_decision_time: Option<f64>,
    pub decision_time_variance: Option<f64>,
    pub mean_decision_time_se: Option<f64>,
}

impl BatchMetrics {
    pub fn from_runs(n_options: usize, runs: &[RunRecord]) -> Self {
        let mut wins = vec![0usize; n_options];
        let mut times = Vec::new();
        for r in runs.iter().filter(|r| r.decided) {
            if let Some(w) = r.winner {
                wins[w.index()] += 1;
            }
            times.push(r.decision_time);
        }
        let decided = times.len();
        let (exit_probability, exit_probability_se) = if decided == 0 {
            (vec![0.0; n_options], vec![0.0; n_options])
        } else {
            let d = decided as f64;
            let p: Vec<f64> = wins.iter().map(|&w| w as f64 / d).collect();
            let se = p.iter().map(|p| (p * (1.0 - p) / d).sqrt()).collect();
            (p, se)
        };
        let (mean, var, se) = match decided {
            0 => (None, None, None),
            1 => (Some(times[0]), Some(0.0), Some(0.0)),
            d => {
                let mean = times.iter().sum::<f64>() / d as f64;
                let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (d as f64 - 1.0);
                (Some(mean), Some(var), Some((var / d as f64).sqrt()))
            }
        };
        BatchMetrics {
            repetitions: runs.len(),
            decided,
            non_decision_rate: if runs.is_empty() {
                0.0
            } else {
                (runs.len() - decided) as f64 / runs.len() as f64
            },
            wins,
            exit_probability,
            exit_probability_se,
            mean_decision_time: mean,
            decision_time_variance: var,
            mean_decision_time_se: se,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Batch {
    pub runs: Vec<RunRecord>,
    pub metrics: BatchMetrics,
}

/// Runs `repetitions` independent runs with seeds `seed_base + k`, in
/// parallel. The result does not depend on the number of threads.
pub fn batch(
    engine: Engine,
    config: &SwarmConfig,
    instance: &ProblemInstance,
    repetitions: usize,
    seed_base: u64,
) -> Result<Batch, SimulationError> {
    instance.validate()?;
    config.validate(instance)?;
    let runs = (0..repetitions as u64)
        .into_par_iter()
        .map(|k| engine.run(&config.with_seed(seed_base.wrapping_add(k)), instance))
        .collect::<Result<Vec<_>, _>>()?;
    let metrics = BatchMetrics::from_runs(instance.n(), &runs);
    Ok(Batch { runs, metrics })
}
