//! Per-agent exploration/dissemination state machine and decision rules.
//!
//! An agent alternates between exploring the option it currently favours
//! and disseminating that opinion. Exploration lasts on average as long as
//! the option's cost; dissemination lasts on average `g` times the agent's
//! quality estimate. When dissemination ends the agent applies its decision
//! rule to the opinions it has just heard and starts exploring the outcome.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{OptionId, ProblemInstance};
use crate::rng;
use crate::scenarios;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StrategyError {
    #[error("quality estimate {0} is not positive; estimates must be floored at q_min > 0")]
    DegenerateQuality(f64),
    #[error("agent {agent} stepped at t = {now} but its phase only ends at t = {ends_at}")]
    PhaseNotExpired { agent: usize, now: f64, ends_at: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Exploration(OptionId),
    Dissemination(OptionId),
}

impl Phase {
    /// The option the agent currently holds as its opinion.
    pub fn opinion(self) -> OptionId {
        match self {
            Phase::Exploration(o) | Phase::Dissemination(o) => o,
        }
    }

    pub fn is_exploration(self) -> bool {
        matches!(self, Phase::Exploration(_))
    }

    pub fn is_dissemination(self) -> bool {
        matches!(self, Phase::Dissemination(_))
    }
}

/// Most recently heard neighbour opinions, oldest first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpinionBuffer {
    capacity: usize,
    entries: VecDeque<OptionId>,
}

impl OpinionBuffer {
    /// # Panics
    /// Panics if `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "opinion buffer capacity must be at least 1");
        OpinionBuffer {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn from_entries(capacity: usize, entries: &[OptionId]) -> Self {
        let mut buffer = Self::new(capacity);
        for &e in entries {
            buffer.record(e);
        }
        buffer
    }

    /// Appends `opinion`, evicting the oldest entry when full.
    pub fn record(&mut self, opinion: OptionId) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(opinion);
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> Vec<OptionId> {
        self.entries.iter().copied().collect()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = OptionId> + '_ {
        self.entries.iter().copied()
    }

    /// Entries as one slice, oldest first.
    pub fn as_slice(&mut self) -> &[OptionId] {
        self.entries.make_contiguous()
    }
}

/// Functional form of [`OpinionBuffer::record`].
pub fn record_neighbor_opinion(mut buffer: OpinionBuffer, opinion: OptionId) -> OpinionBuffer {
    buffer.record(opinion);
    buffer
}

/// How an agent turns its own opinion and its buffer into a new opinion.
///
/// Majority ties (and empty buffers) always keep the agent's own opinion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DecisionRule {
    Voter,
    Majority {
        #[serde(default = "default_include_self")]
        include_self: bool,
    },
}

fn default_include_self() -> bool {
    true
}

impl DecisionRule {
    pub fn majority() -> Self {
        DecisionRule::Majority { include_self: true }
    }

    pub fn apply<R: Rng + ?Sized>(self, own: OptionId, buffer: &[OptionId], rng: &mut R) -> OptionId {
        match self {
            DecisionRule::Voter => apply_voter(own, buffer, rng),
            DecisionRule::Majority { include_self } => apply_majority(own, buffer, include_self),
        }
    }
}

/// Adopts the opinion of a uniformly chosen buffer entry, or keeps `own`
/// when nothing was heard.
pub fn apply_voter<R: Rng + ?Sized>(own: OptionId, buffer: &[OptionId], rng: &mut R) -> OptionId {
    if buffer.is_empty() {
        own
    } else {
        buffer[rng.random_range(0..buffer.len())]
    }
}

/// Adopts the strict plurality opinion of the buffer (plus `own` once when
/// `include_self`); keeps `own` on ties or an empty buffer.
pub fn apply_majority(own: OptionId, buffer: &[OptionId], include_self: bool) -> OptionId {
    if buffer.is_empty() {
        return own;
    }
    let width = buffer.iter().chain(std::iter::once(&own)).map(|o| o.index()).max().unwrap_or(0) + 1;
    let mut counts = vec![0u32; width];
    for o in buffer {
        counts[o.index()] += 1;
    }
    if include_self {
        counts[own.index()] += 1;
    }
    plurality(&counts).unwrap_or(own)
}

/// Index of the unique maximum of `counts`, if there is one.
pub(crate) fn plurality_index(counts: &[u32]) -> Option<usize> {
    let max = *counts.iter().max()?;
    let mut winners = counts.iter().enumerate().filter(|(_, &c)| c == max);
    let (first, _) = winners.next()?;
    match winners.next() {
        None => Some(first),
        Some(_) => None,
    }
}

fn plurality(counts: &[u32]) -> Option<OptionId> {
    plurality_index(counts).map(OptionId::from_index)
}

/// Exploration time for `option`: exponential with mean equal to its cost.
pub fn sample_exploration_duration<R: Rng + ?Sized>(option: OptionId, instance: &ProblemInstance, rng: &mut R) -> f64 {
    rng::exponential(instance.option(option).cost, rng)
}

/// Dissemination time: exponential with mean `gain * quality_estimate`.
pub fn sample_dissemination_duration<R: Rng + ?Sized>(
    quality_estimate: f64,
    gain: f64,
    rng: &mut R,
) -> Result<f64, StrategyError> {
    if !(quality_estimate > 0.0) {
        return Err(StrategyError::DegenerateQuality(quality_estimate));
    }
    Ok(rng::exponential(gain * quality_estimate, rng))
}

/// Noisy quality estimate of `option` at time `now`, clamped to `[q_min, 1]`.
///
/// Collective-perception instances use their binomial cell sampler instead
/// of Gaussian noise.
pub fn measure_quality<R: Rng + ?Sized>(
    option: OptionId,
    instance: &ProblemInstance,
    now: f64,
    sigma: f64,
    q_min: f64,
    rng: &mut R,
) -> f64 {
    if let Some(perception) = instance.perception() {
        return scenarios::sample_perceived_quality(perception, option, q_min, rng);
    }
    let truth = instance.quality_at(option, now);
    let noisy = if sigma > 0.0 {
        truth + Normal::new(0.0, sigma).expect("sigma is finite and positive").sample(rng)
    } else {
        truth
    };
    noisy.clamp(q_min, 1.0)
}

/// Parameters of the strategy shared by every agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrategyParams {
    /// Dissemination gain `g`: mean dissemination time of a quality-1 option.
    pub gain: f64,
    pub sigma: f64,
    pub q_min: f64,
    pub rule: DecisionRule,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub id: usize,
    pub phase: Phase,
    pub phase_ends_at: f64,
    pub quality_estimate: f64,
    pub buffer: OpinionBuffer,
}

impl AgentState {
    pub fn opinion(&self) -> OptionId {
        self.phase.opinion()
    }
}

/// Advances an agent whose current phase has expired.
///
/// Exploration of `i` always leads to dissemination of `i` with a fresh
/// quality estimate. Dissemination ends with a decision over the buffer,
/// which is then cleared, and exploration of the chosen option (even when
/// the opinion did not change).
pub fn step_agent<R: Rng + ?Sized>(
    mut agent: AgentState,
    now: f64,
    instance: &ProblemInstance,
    params: &StrategyParams,
    rng: &mut R,
) -> Result<AgentState, StrategyError> {
    if now < agent.phase_ends_at {
        return Err(StrategyError::PhaseNotExpired {
            agent: agent.id,
            now,
            ends_at: agent.phase_ends_at,
        });
    }
    match agent.phase {
        Phase::Exploration(option) => {
            let estimate = measure_quality(option, instance, now, params.sigma, params.q_min, rng);
            let duration = sample_dissemination_duration(estimate, params.gain, rng)?;
            agent.quality_estimate = estimate;
            agent.phase = Phase::Dissemination(option);
            agent.phase_ends_at = now + duration;
        }
        Phase::Dissemination(own) => {
            let next = params.rule.apply(own, agent.buffer.as_slice(), rng);
            agent.buffer.clear();
            agent.phase = Phase::Exploration(next);
            agent.phase_ends_at = now + sample_exploration_duration(next, instance, rng);
        }
    }
    Ok(agent)
}
