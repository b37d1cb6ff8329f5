mod common;

use bestofn::meanfield::{exact_absorption, DEFAULT_STATE_LIMIT};
use bestofn::simulator::{batch, run, Engine, SwarmConfig};
use bestofn::strategy::DecisionRule;

use common::*;

#[test]
fn hundred_agents_always_decide() {
    let inst = binary([1.0, 1.0], [1.0, 1.0]);
    for seed in 0..100 {
        let r = run(&SwarmConfig::default().with_seed(seed), &inst).unwrap();
        assert!(r.decided, "seed {seed} stopped at {}", r.decision_time);
        assert!(r.decision_time < 1e5);
    }
}

#[test]
fn same_seed_same_trajectory() {
    let inst = binary([1.0, 0.7], [1.0, 2.0]);
    let config = SwarmConfig {
        seed: 99,
        trajectory_interval: Some(1.0),
        rule: DecisionRule::majority(),
        ..Default::default()
    };
    assert_eq!(run(&config, &inst).unwrap(), run(&config, &inst).unwrap());
    let other = run(&config.with_seed(100), &inst).unwrap();
    assert_ne!(run(&config, &inst).unwrap().trajectory, other.trajectory);
}

#[test]
fn batch_is_order_stable_and_seeded_by_index() {
    let inst = binary([1.0, 1.0], [1.0, 1.0]);
    let config = SwarmConfig {
        population: 20,
        ..Default::default()
    };
    let b = batch(Engine::Agents, &config, &inst, 16, 500).unwrap();
    for (k, r) in b.runs.iter().enumerate() {
        assert_eq!(r.seed, 500 + k as u64);
        assert_eq!(r, &run(&config.with_seed(500 + k as u64), &inst).unwrap());
    }
}

#[test]
fn symmetric_batch_splits_evenly() {
    let m = metrics(Engine::Agents, &SwarmConfig::default(), &binary([1.0, 1.0], [1.0, 1.0]), 1000, 0);
    assert_eq!(m.decided, 1000);
    assert!((m.exit_probability[0] - 0.5).abs() <= 0.05, "{:?}", m.exit_probability);
}

#[test]
fn degenerate_start_decides_immediately() {
    let config = SwarmConfig {
        initial_opinions: Some(vec![1.0, 0.0]),
        ..Default::default()
    };
    let m = metrics(Engine::Agents, &config, &binary([1.0, 0.5], [1.0, 1.0]), 10, 0);
    assert_eq!(m.exit_probability, vec![1.0, 0.0]);
    assert_eq!(m.mean_decision_time, Some(0.0));
}

#[test]
fn better_quality_wins_more_often() {
    let inst = binary([1.0, 0.5], [1.0, 1.0]);
    let m = metrics(Engine::Agents, &SwarmConfig::default(), &inst, 1000, 0);
    let se = m.exit_probability_se[0].max(binomial_se(0.5, 1000));
    assert!(m.exit_probability[0] > 0.5 + 3.0 * se, "{:?}", m.exit_probability);

    // the same ordering holds exactly in the small swarm
    let small = SwarmConfig {
        population: 10,
        ..Default::default()
    };
    let exact = exact_absorption(&inst, &small, DEFAULT_STATE_LIMIT).unwrap();
    assert!(exact.probabilities[0] > 0.5);
    let m = metrics(Engine::Agents, &small, &inst, 1000, 0);
    assert!(m.exit_probability[0] > 0.5 + 3.0 * binomial_se(0.5, 1000));
}

#[test]
fn raising_the_first_quality_never_lowers_its_share() {
    // q_1 rises while q_2 stays fixed; the instance is renormalised
    let config = SwarmConfig {
        population: 20,
        ..Default::default()
    };
    let mut previous: Option<(f64, f64)> = None;
    for q1 in [0.6, 0.8, 1.0] {
        let inst = bestofn::ProblemInstance::normalized(&[q1, 0.6], &[1.0, 1.0], bestofn::Interaction::NotApplicable).unwrap();
        let m = metrics(Engine::Agents, &config, &inst, 1000, 0);
        let (p, se) = (m.exit_probability[0], m.exit_probability_se[0]);
        if let Some((p0, se0)) = previous {
            assert!(p >= p0 - 3.0 * (se.powi(2) + se0.powi(2)).sqrt(), "q1={q1}: {p} after {p0}");
        }
        previous = Some((p, se));
    }
}

#[test]
fn relabeling_permutes_exit_probabilities() {
    let inst = bestofn::ProblemInstance::new(&[1.0, 0.6, 0.8], &[1.0, 1.0, 2.0], bestofn::Interaction::Antagonistic).unwrap();
    let config = SwarmConfig {
        population: 30,
        initial_opinions: Some(vec![0.5, 0.3, 0.2]),
        ..Default::default()
    };
    let perm = [2usize, 0, 1];
    let swapped = inst.permuted(&perm);
    let swapped_config = SwarmConfig {
        initial_opinions: Some(perm.iter().map(|&p| config.initial_opinions.as_ref().unwrap()[p]).collect()),
        ..config.clone()
    };
    let a = metrics(Engine::Agents, &config, &inst, 1500, 0);
    let b = metrics(Engine::Agents, &swapped_config, &swapped, 1500, 777_777);
    for (k, &p) in perm.iter().enumerate() {
        let se = (a.exit_probability_se[p].powi(2) + b.exit_probability_se[k].powi(2)).sqrt();
        assert!(
            (a.exit_probability[p] - b.exit_probability[k]).abs() <= 3.0 * se.max(1e-3),
            "option {} vs {}",
            p + 1,
            k + 1
        );
    }
}

#[test]
fn partial_consensus_threshold() {
    let inst = binary([1.0, 1.0], [1.0, 1.0]);
    let config = SwarmConfig {
        tau: 0.8,
        trajectory_interval: Some(1.0),
        ..Default::default()
    };
    for seed in 0..20 {
        let r = run(&config.with_seed(seed), &inst).unwrap();
        let winner = r.winner.unwrap();
        let held = r.trajectory.opinion_counts(r.trajectory.len() - 1);
        assert!(held[winner.index()] >= 80);
        // opinions only change at decisions, and consensus is checked after
        // each one, so the last sample before the decision is below threshold
        let before = r.trajectory.opinion_counts(r.trajectory.len() - 2);
        assert!(before.iter().all(|&c| c < 80), "{before:?}");
    }
}

#[test]
fn undecided_runs_are_counted() {
    let config = SwarmConfig {
        max_time: 5.0,
        ..Default::default()
    };
    let m = metrics(Engine::Agents, &config, &binary([1.0, 1.0], [1.0, 1.0]), 20, 0);
    assert_eq!(m.decided, 0);
    assert_eq!(m.non_decision_rate, 1.0);
    assert_eq!(m.mean_decision_time, None);
}
