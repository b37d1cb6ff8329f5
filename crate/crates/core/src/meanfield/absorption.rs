//! Exact exit probabilities and decision times of the finite-swarm Markov
//! chain, by sparse linear solves over the full compartment state space.
//!
//! With `A = diag(out-rate) - R_TT` over transient states and `B` the rates
//! from transient states into the decision set of each option:
//!
//! * exit probabilities `U` solve `A U = B`,
//! * expected decision times `m` solve `A m = 1`,
//! * `V_i = E[tau; exit at i]` solves `A V = U`.

use std::collections::HashMap;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use serde::Serialize;

use super::decision::{finite_decision_distribution, for_each_composition};
use super::MeanFieldError;
use crate::problem::{OptionId, ProblemInstance};
use crate::simulator::{consensus_threshold, InitialPhase, SwarmConfig};

pub const DEFAULT_STATE_LIMIT: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbsorptionResult {
    /// Number of compartment states enumerated.
    pub states: usize,
    /// Probability that the decision lands on each option.
    pub probabilities: Vec<f64>,
    /// Expected time until a decision.
    pub mean_time: f64,
    /// Expected decision time conditional on each outcome; `None` for
    /// outcomes with zero probability.
    pub conditional_mean_time: Vec<Option<f64>>,
}

/// Number of ways to place `population` agents in `compartments` compartments.
pub fn state_space_size(population: usize, compartments: usize) -> Option<usize> {
    // C(N + k - 1, k - 1)
    let k = compartments.checked_sub(1)?;
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        acc = acc.checked_mul(population as u128 + i)? / i;
    }
    usize::try_from(acc).ok()
}

fn decided_option(state: &[u32], threshold: u32) -> Option<usize> {
    let n = state.len() / 2;
    (0..n).find(|&i| state[i] + state[n + i] >= threshold)
}

fn binomial_pmf(trials: u32, p: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; trials as usize + 1];
    let mut coef = 1.0f64;
    for (k, slot) in pmf.iter_mut().enumerate() {
        if k > 0 {
            coef = coef * f64::from(trials - k as u32 + 1) / k as f64;
        }
        *slot = coef * p.powi(k as i32) * (1.0 - p).powi((trials - k as u32) as i32);
    }
    pmf
}

/// Distribution over compartment states at time zero.
fn initial_distribution(config: &SwarmConfig, instance: &ProblemInstance) -> Vec<(Vec<u32>, f64)> {
    let n = instance.n();
    let counts = config.initial_counts(n);
    let mut out = vec![(vec![0u32; 2 * n], 1.0)];
    for (i, &count) in counts.iter().enumerate() {
        let opt = &instance.options()[i];
        let share = match config.initial_phase {
            InitialPhase::Exploration => 0.0,
            InitialPhase::Stationary => config.gain * opt.quality / (opt.cost + config.gain * opt.quality),
        };
        let pmf = binomial_pmf(count, share);
        let mut next = Vec::new();
        for (state, weight) in &out {
            for (d, p) in pmf.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                let mut s = state.clone();
                s[n + i] = d as u32;
                s[i] = count - d as u32;
                next.push((s, weight * p));
            }
        }
        out = next;
    }
    out
}

/// Solves for exit probabilities and mean decision times of a swarm of
/// `config.population` agents, starting from the configured initial state.
/// The decision set is every state where some opinion reaches
/// `ceil(tau N)` agents.
pub fn exact_absorption(
    instance: &ProblemInstance,
    config: &SwarmConfig,
    state_limit: usize,
) -> Result<AbsorptionResult, MeanFieldError> {
    instance.validate()?;
    config.validate(instance)?;
    let n = instance.n();
    let population = config.population;
    let states = state_space_size(population, 2 * n).filter(|&s| s <= state_limit).ok_or(
        MeanFieldError::StateSpaceTooLarge {
            population,
            options: n,
            limit: state_limit,
        },
    )?;
    let threshold = consensus_threshold(config.tau, population);

    // Enumerate transient states; decision states are only targets.
    let mut transient: Vec<Vec<u32>> = Vec::new();
    let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut counts = vec![0u32; 2 * n];
    for_each_composition(population, &mut counts, 0, &mut |s| {
        if decided_option(s, threshold).is_none() {
            index.insert(s.to_vec(), transient.len());
            transient.push(s.to_vec());
        }
    });
    let t = transient.len();

    let initial = initial_distribution(config, instance);
    let mut probabilities = vec![0.0; n];
    let mut pending = Vec::new();
    for (state, weight) in initial {
        match decided_option(&state, threshold) {
            Some(i) => probabilities[i] += weight,
            None => pending.push((index[&state], weight)),
        }
    }
    if pending.is_empty() {
        return Ok(AbsorptionResult {
            states,
            conditional_mean_time: probabilities.iter().map(|&p| (p > 0.0).then_some(0.0)).collect(),
            probabilities,
            mean_time: 0.0,
        });
    }

    let explore_rate: Vec<f64> = instance.options().iter().map(|o| 1.0 / o.cost).collect();
    let decide_rate: Vec<f64> = instance
        .options()
        .iter()
        .map(|o| 1.0 / (config.gain * o.quality.clamp(config.q_min, 1.0)))
        .collect();

    let mut triplets: Vec<Triplet<usize, usize, f64>> = Vec::new();
    let mut exits = vec![0.0; t * n];
    let mut target = vec![0u32; 2 * n];
    for (row, s) in transient.iter().enumerate() {
        let mut out_rate = 0.0;
        let mut add = |target: &[u32], rate: f64, triplets: &mut Vec<Triplet<usize, usize, f64>>| {
            if rate <= 0.0 {
                return;
            }
            out_rate += rate;
            match decided_option(target, threshold) {
                Some(i) => exits[row * n + i] += rate,
                None => triplets.push(Triplet::new(row, index[target], -rate)),
            }
        };
        for i in 0..n {
            if s[i] > 0 {
                target.copy_from_slice(s);
                target[i] -= 1;
                target[n + i] += 1;
                add(&target, f64::from(s[i]) * explore_rate[i], &mut triplets);
            }
        }
        for j in 0..n {
            if s[n + j] == 0 {
                continue;
            }
            let rate = f64::from(s[n + j]) * decide_rate[j];
            let w = finite_decision_distribution(config.rule, OptionId::from_index(j), &s[n..], config.buffer_capacity);
            for (i, wi) in w.iter().enumerate() {
                target.copy_from_slice(s);
                target[n + j] -= 1;
                target[i] += 1;
                add(&target, rate * wi, &mut triplets);
            }
        }
        triplets.push(Triplet::new(row, row, out_rate));
    }

    let a = SparseColMat::<usize, f64>::try_new_from_triplets(t, t, &triplets)
        .map_err(|e| MeanFieldError::LinearSolve(format!("{e:?}")))?;
    let lu = a.sp_lu().map_err(|e| MeanFieldError::LinearSolve(format!("{e:?}")))?;

    let b = Mat::from_fn(t, n, |r, i| exits[r * n + i]);
    let u = lu.solve(&b);
    let ones = Mat::from_fn(t, 1, |_, _| 1.0);
    let m = lu.solve(&ones);
    let v = lu.solve(&u);

    let mut mean_time = 0.0;
    let mut weighted_time = vec![0.0; n];
    for &(row, weight) in &pending {
        mean_time += weight * m[(row, 0)];
        for i in 0..n {
            probabilities[i] += weight * u[(row, i)];
            weighted_time[i] += weight * v[(row, i)];
        }
    }
    let conditional_mean_time = probabilities
        .iter()
        .zip(&weighted_time)
        .map(|(&p, &w)| (p > 1e-300).then(|| w / p))
        .collect();
    Ok(AbsorptionResult {
        states,
        probabilities,
        mean_time,
        conditional_mean_time,
    })
}
