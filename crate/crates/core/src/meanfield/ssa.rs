//! Gillespie direct-method simulation of the population-level Markov chain.
//!
//! The state is the number of agents in each (phase, option) compartment.
//! Agents exploring `i` start disseminating at rate `E_i / c_i`. Agents
//! disseminating `j` decide at total rate `D_j / (g q_j)` and move to
//! exploring `i` with the finite-swarm outcome distribution
//! [`finite_decision_distribution`], i.e. with buffer entries drawn with
//! replacement from the other disseminating agents.
//!
//! Quality noise (`sigma`) is not modelled; quality is read at its
//! time-zero value and floored at `q_min`.

use rand::Rng;

use super::decision::finite_decision_distribution;
use crate::problem::{OptionId, ProblemInstance};
use crate::rng::{self, SwarmRng};
use crate::simulator::{detect_consensus, InitialPhase, RunRecord, Sampler, SwarmConfig, Trajectory};

fn pick<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return k;
        }
    }
    // rounding: fall back to the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Initial compartment counts `[E_1..E_n, D_1..D_n]`.
pub(crate) fn initial_state(config: &SwarmConfig, instance: &ProblemInstance, rng: &mut SwarmRng) -> Vec<u32> {
    let n = instance.n();
    let mut state = vec![0u32; 2 * n];
    for (i, &count) in config.initial_counts(n).iter().enumerate() {
        let opt = &instance.options()[i];
        let share = config.gain * opt.quality / (opt.cost + config.gain * opt.quality);
        for _ in 0..count {
            if config.initial_phase == InitialPhase::Stationary && rng.random::<f64>() < share {
                state[n + i] += 1;
            } else {
                state[i] += 1;
            }
        }
    }
    state
}

fn opinion_counts(state: &[u32]) -> Vec<u32> {
    let n = state.len() / 2;
    (0..n).map(|i| state[i] + state[n + i]).collect()
}

/// One SSA trajectory with the same contract as [`crate::simulator::run`].
pub fn ssa_run(instance: &ProblemInstance, config: &SwarmConfig, rng: &mut SwarmRng) -> RunRecord {
    let n = instance.n();
    let population = config.population;
    let mut state = initial_state(config, instance, rng);
    let mut trajectory = Trajectory::new(n);
    let mut sampler = Sampler::new(config.trajectory_interval);
    trajectory.push(0.0, &state);

    let mut record = RunRecord {
        seed: config.seed,
        decided: false,
        winner: None,
        decision_time: config.max_time,
        events: 0,
        trajectory: Trajectory::default(),
    };
    if let Some(w) = detect_consensus(&opinion_counts(&state), config.tau, population) {
        record.decided = true;
        record.winner = Some(w);
        record.decision_time = 0.0;
        record.trajectory = trajectory;
        return record;
    }

    let explore_rate: Vec<f64> = instance.options().iter().map(|o| 1.0 / o.cost).collect();
    let decide_rate: Vec<f64> = instance
        .options()
        .iter()
        .map(|o| 1.0 / (config.gain * o.quality.clamp(config.q_min, 1.0)))
        .collect();
    let mut rates = vec![0.0; 2 * n];
    let mut t = 0.0;
    loop {
        for i in 0..n {
            rates[i] = f64::from(state[i]) * explore_rate[i];
            rates[n + i] = f64::from(state[n + i]) * decide_rate[i];
        }
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            break;
        }
        let next = t + rng::exponential(1.0 / total, rng);
        if next > config.max_time {
            break;
        }
        t = next;
        sampler.fill_until(t, config.max_time, &state, &mut trajectory);
        let k = pick(&rates, total, rng);
        record.events += 1;
        if k < n {
            state[k] -= 1;
            state[n + k] += 1;
            continue;
        }
        let own = k - n;
        let w = finite_decision_distribution(config.rule, OptionId::from_index(own), &state[n..], config.buffer_capacity);
        let chosen = pick(&w, 1.0, rng);
        state[k] -= 1;
        state[chosen] += 1;
        if let Some(winner) = detect_consensus(&opinion_counts(&state), config.tau, population) {
            record.decided = true;
            record.winner = Some(winner);
            record.decision_time = t;
            break;
        }
    }
    if !record.decided {
        sampler.fill_until(f64::INFINITY, config.max_time, &state, &mut trajectory);
    }
    trajectory.push(record.decision_time, &state);
    record.trajectory = trajectory;
    record
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Interaction;
    use crate::strategy::DecisionRule;

    #[test]
    fn initial_consensus_is_absorbed_immediately() {
        let inst = ProblemInstance::new(&[1.0, 1.0], &[1.0, 1.0], Interaction::NotApplicable).unwrap();
        let config = SwarmConfig {
            population: 2,
            initial_opinions: Some(vec![1.0, 0.0]),
            ..Default::default()
        };
        let r = ssa_run(&inst, &config, &mut rng::seeded(1));
        assert!(r.decided);
        assert_eq!(r.winner, Some(OptionId::new(1)));
        assert_eq!(r.decision_time, 0.0);
    }

    #[test]
    fn conserves_agents() {
        let inst = ProblemInstance::new(&[1.0, 0.5], &[1.0, 2.0], Interaction::Synergistic).unwrap();
        let config = SwarmConfig {
            population: 40,
            rule: DecisionRule::majority(),
            trajectory_interval: Some(1.0),
            ..Default::default()
        };
        let r = ssa_run(&inst, &config, &mut rng::seeded(8));
        assert!(r.decided);
        for (_, row) in r.trajectory.rows() {
            assert_eq!(row.iter().sum::<u32>(), 40);
        }
        let last = r.trajectory.opinion_counts(r.trajectory.len() - 1);
        assert_eq!(last[r.winner.unwrap().index()], 40);
    }
}
