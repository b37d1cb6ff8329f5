#![allow(dead_code)]

use bestofn::meanfield::{integrate, MeanFieldState, MeanFieldTrajectory};
use bestofn::problem::{Interaction, ProblemInstance};
use bestofn::simulator::{batch, BatchMetrics, Engine, SwarmConfig};
use bestofn::strategy::DecisionRule;

pub fn binary(q: [f64; 2], c: [f64; 2]) -> ProblemInstance {
    ProblemInstance::new(&q, &c, Interaction::NotApplicable).unwrap()
}

pub fn rule_name(rule: DecisionRule) -> &'static str {
    match rule {
        DecisionRule::Voter => "voter",
        DecisionRule::Majority { .. } => "majority",
    }
}

/// Standard error of a frequency estimated from `r` Bernoulli trials with
/// success probability `p`.
pub fn binomial_se(p: f64, r: usize) -> f64 {
    (p * (1.0 - p) / r as f64).sqrt()
}

/// Distance between a batch estimate of `E_1` and an exact value, in units
/// of the binomial standard error at the exact value.
pub fn z_against_exact(m: &BatchMetrics, exact: f64) -> f64 {
    let se = binomial_se(exact, m.decided);
    let diff = m.exit_probability[0] - exact;
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff.abs() / se
    }
}

/// Distance between two independent batch estimates of `E_1` in units of
/// their combined standard error.
pub fn z_between(a: &BatchMetrics, b: &BatchMetrics) -> f64 {
    let se = (a.exit_probability_se[0].powi(2) + b.exit_probability_se[0].powi(2)).sqrt();
    let diff = (a.exit_probability[0] - b.exit_probability[0]).abs();
    if se == 0.0 {
        if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        diff / se
    }
}

pub fn metrics(engine: Engine, config: &SwarmConfig, instance: &ProblemInstance, r: usize, seed_base: u64) -> BatchMetrics {
    batch(engine, config, instance, r, seed_base).unwrap().metrics
}

/// Largest gap between the mean opinion fractions of `runs` SSA runs and
/// the mean-field trajectory, over a grid of `step`-spaced times up to
/// `horizon`.
pub fn ssa_vs_meanfield(
    instance: &ProblemInstance,
    config: &SwarmConfig,
    runs: usize,
    horizon: f64,
    step: f64,
) -> (f64, MeanFieldTrajectory) {
    let config = SwarmConfig {
        max_time: horizon,
        trajectory_interval: Some(step),
        ..config.clone()
    };
    let y0 = MeanFieldState::from_config(&config, instance);
    let ode = integrate(instance, config.gain, config.rule, config.buffer_capacity, &y0, horizon, 0.01).unwrap();
    let b = batch(Engine::Ssa, &config, instance, runs, 0).unwrap();
    let n = instance.n();
    let points = (horizon / step).round() as usize + 1;
    let mut mean = vec![vec![0.0; n]; points];
    for run in &b.runs {
        let traj = &run.trajectory;
        for (k, row) in mean.iter_mut().enumerate() {
            // a decided run is absorbed: its last row holds from then on
            let t = k as f64 * step;
            let at = if k < traj.len() && (traj.times[k] - t).abs() < 1e-9 {
                k
            } else {
                assert!(run.decided && t >= run.decision_time);
                traj.len() - 1
            };
            let held = traj.opinion_counts(at);
            for i in 0..n {
                row[i] += f64::from(held[i]) / config.population as f64 / runs as f64;
            }
        }
    }
    let mut worst: f64 = 0.0;
    for (k, row) in mean.iter().enumerate() {
        let x = ode.opinion_fractions_at(k as f64 * step);
        for i in 0..n {
            worst = worst.max((row[i] - x[i]).abs());
        }
    }
    (worst, ode)
}

