use proptest::prelude::*;

use bestofn::meanfield::{decision_outcome_distribution, finite_decision_distribution, ode_rhs, MeanFieldState};
use bestofn::problem::{best_options, classify_variant, Interaction, OptionId, ProblemInstance};
use bestofn::rng::seeded;
use bestofn::scenarios::{build_shortest_path, build_site_selection, PathScenario, SiteScenario};
use bestofn::simulator::{run_observed, SwarmConfig};
use bestofn::strategy::{apply_majority, apply_voter, step_agent, AgentState, DecisionRule, OpinionBuffer, Phase, StrategyParams};

const EPS: f64 = 1e-9;

/// Instances whose qualities and costs come from a small grid, so that ties
/// (and therefore every variant) occur often.
fn instance() -> impl Strategy<Value = ProblemInstance> {
    (2usize..6)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(1u32..=4, n),
                prop::collection::vec(1u32..=4, n),
                prop::sample::select(vec![Interaction::Synergistic, Interaction::Antagonistic]),
            )
        })
        .prop_map(|(q, c, interaction)| {
            let q: Vec<f64> = q.iter().map(|&x| f64::from(x)).collect();
            let c: Vec<f64> = c.iter().map(|&x| f64::from(x) * 0.5).collect();
            ProblemInstance::normalized(&q, &c, interaction).unwrap()
        })
}

fn instance_and_perm() -> impl Strategy<Value = (ProblemInstance, Vec<usize>)> {
    instance().prop_flat_map(|inst| {
        let n = inst.n();
        (Just(inst), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

fn labels(ids: &[OptionId]) -> Vec<u32> {
    let mut v: Vec<u32> = ids.iter().map(|o| o.label()).collect();
    v.sort_unstable();
    v
}

fn probability_vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter_map("all zero", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #[test]
    fn variant_and_best_set_are_relabel_invariant((inst, perm) in instance_and_perm()) {
        let permuted = inst.permuted(&perm);
        prop_assert_eq!(classify_variant(&inst, EPS).unwrap(), classify_variant(&permuted, EPS).unwrap());
        // new option k is old option perm[k]
        let mapped: Vec<OptionId> = best_options(&permuted, EPS)
            .unwrap()
            .iter()
            .map(|o| OptionId::from_index(perm[o.index()]))
            .collect();
        prop_assert_eq!(labels(&mapped), labels(&best_options(&inst, EPS).unwrap()));
    }

    #[test]
    fn best_set_is_never_empty(inst in instance()) {
        prop_assert!(!best_options(&inst, EPS).unwrap().is_empty());
    }

    #[test]
    fn cost_scaling_changes_nothing(inst in instance(), factor in 1e-3f64..1e3) {
        let costs: Vec<f64> = inst.costs().iter().map(|c| c * factor).collect();
        let scaled = ProblemInstance::new(&inst.qualities(), &costs, inst.interaction()).unwrap();
        prop_assert_eq!(classify_variant(&inst, EPS).unwrap(), classify_variant(&scaled, EPS).unwrap());
        prop_assert_eq!(labels(&best_options(&inst, EPS).unwrap()), labels(&best_options(&scaled, EPS).unwrap()));
    }

    #[test]
    fn scenario_scaling_changes_nothing(values in prop::collection::vec(1u32..=5, 2..6), factor in 0.01f64..100.0) {
        let values: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
        let scaled: Vec<f64> = values.iter().map(|v| v * factor).collect();
        let a = build_shortest_path(&PathScenario { lengths: values.clone(), base_time: 1.0 }).unwrap();
        let b = build_shortest_path(&PathScenario { lengths: scaled.clone(), base_time: 1.0 }).unwrap();
        prop_assert!(a.validate().is_ok());
        prop_assert!(a.qualities().iter().all(|&q| q == 1.0));
        prop_assert_eq!(classify_variant(&a, EPS).unwrap(), classify_variant(&b, EPS).unwrap());
        prop_assert_eq!(labels(&best_options(&a, EPS).unwrap()), labels(&best_options(&b, EPS).unwrap()));
        let a = build_site_selection(&SiteScenario { areas: values, discovery_base: 1.0 }).unwrap();
        let b = build_site_selection(&SiteScenario { areas: scaled, discovery_base: 1.0 }).unwrap();
        prop_assert!(a.validate().is_ok());
        prop_assert_eq!(classify_variant(&a, EPS).unwrap(), classify_variant(&b, EPS).unwrap());
        prop_assert_eq!(labels(&best_options(&a, EPS).unwrap()), labels(&best_options(&b, EPS).unwrap()));
    }

    #[test]
    fn rules_pick_from_own_or_buffer(own in 0usize..4, buffer in prop::collection::vec(0usize..4, 0..6), seed: u64) {
        let own = OptionId::from_index(own);
        let buffer: Vec<OptionId> = buffer.into_iter().map(OptionId::from_index).collect();
        let mut rng = seeded(seed);
        for out in [
            apply_voter(own, &buffer, &mut rng),
            apply_majority(own, &buffer, true),
            apply_majority(own, &buffer, false),
        ] {
            prop_assert!(out == own || buffer.contains(&out));
        }
    }

    #[test]
    fn rules_commute_with_relabeling(
        own in 0usize..4,
        buffer in prop::collection::vec(0usize..4, 0..6),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        seed: u64,
    ) {
        let relabel = |o: OptionId| OptionId::from_index(perm[o.index()]);
        let own = OptionId::from_index(own);
        let buffer: Vec<OptionId> = buffer.into_iter().map(OptionId::from_index).collect();
        let moved: Vec<OptionId> = buffer.iter().copied().map(relabel).collect();
        for include_self in [true, false] {
            prop_assert_eq!(
                apply_majority(relabel(own), &moved, include_self),
                relabel(apply_majority(own, &buffer, include_self))
            );
        }
        // the voter draws a buffer position, so equal seeds give matching picks
        prop_assert_eq!(
            apply_voter(relabel(own), &moved, &mut seeded(seed)),
            relabel(apply_voter(own, &buffer, &mut seeded(seed)))
        );
        prop_assert_eq!(apply_majority(own, &buffer, true), apply_majority(own, &buffer, true));
    }

    #[test]
    fn fsm_alternates_and_clears_buffer(
        seed: u64,
        heard in prop::collection::vec(prop::collection::vec(0usize..3, 0..5), 1..20),
        majority: bool,
    ) {
        let inst = ProblemInstance::new(&[1.0, 0.7, 0.4], &[1.0, 2.0, 0.5], Interaction::Synergistic).unwrap();
        let params = StrategyParams {
            gain: 10.0,
            sigma: 0.1,
            q_min: 0.01,
            rule: if majority { DecisionRule::majority() } else { DecisionRule::Voter },
        };
        let mut rng = seeded(seed);
        let mut agent = AgentState {
            id: 0,
            phase: Phase::Exploration(OptionId::from_index(0)),
            phase_ends_at: 0.0,
            quality_estimate: 1.0,
            buffer: OpinionBuffer::new(3),
        };
        for entries in &heard {
            let before = agent.phase;
            let now = agent.phase_ends_at;
            agent = step_agent(agent, now, &inst, &params, &mut rng).unwrap();
            prop_assert!(agent.phase.is_dissemination());
            prop_assert_eq!(agent.opinion(), before.opinion());
            prop_assert!(agent.quality_estimate >= 0.01 && agent.quality_estimate <= 1.0);
            for &e in entries {
                agent.buffer.record(OptionId::from_index(e));
            }
            let now = agent.phase_ends_at;
            agent = step_agent(agent, now, &inst, &params, &mut rng).unwrap();
            prop_assert!(agent.phase.is_exploration());
            prop_assert!(agent.buffer.is_empty());
            prop_assert!(agent.phase_ends_at >= now);
        }
    }

    #[test]
    fn outcome_distribution_is_a_probability_vector(
        p in (2usize..5).prop_flat_map(probability_vector),
        own_raw in 0usize..5,
        size in 0usize..7,
        include_self: bool,
    ) {
        let own = OptionId::from_index(own_raw % p.len());
        for rule in [DecisionRule::Voter, DecisionRule::Majority { include_self }] {
            let w = decision_outcome_distribution(rule, own, &p, size);
            prop_assert!(w.iter().all(|&x| x >= 0.0));
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        if size > 0 {
            prop_assert_eq!(decision_outcome_distribution(DecisionRule::Voter, own, &p, size), p);
        }
    }

    #[test]
    fn finite_distribution_is_a_probability_vector(
        d in prop::collection::vec(0u32..6, 2..4),
        own_raw in 0usize..4,
        size in 1usize..5,
    ) {
        let own = own_raw % d.len();
        let mut d = d;
        d[own] += 1;
        let w = finite_decision_distribution(DecisionRule::majority(), OptionId::from_index(own), &d, size);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ode_rhs_conserves_mass(
        raw in (2usize..5).prop_flat_map(|n| probability_vector(2 * n)),
        q in prop::collection::vec(0.05f64..1.0, 4),
        c in prop::collection::vec(0.1f64..5.0, 4),
        gain in 1.0f64..20.0,
        size in 1usize..6,
        majority: bool,
    ) {
        let n = raw.len() / 2;
        let mut q = q[..n].to_vec();
        q[0] = 1.0;
        let inst = ProblemInstance::new(&q, &c[..n], Interaction::Synergistic).unwrap();
        let state = MeanFieldState::new(raw[..n].to_vec(), raw[n..].to_vec());
        let rule = if majority { DecisionRule::majority() } else { DecisionRule::Voter };
        let d = ode_rhs(&state, &inst, gain, rule, size);
        prop_assert!(d.total().abs() < 1e-12);
    }

    #[test]
    fn consensus_is_a_fixed_point_of_the_opinion_split(
        x in 0.0f64..=1.0,
        winner in 0usize..3,
        gain in 1.0f64..20.0,
        majority: bool,
    ) {
        let inst = ProblemInstance::new(&[1.0, 0.6, 0.3], &[1.0, 2.0, 3.0], Interaction::Antagonistic).unwrap();
        let mut e = vec![0.0; 3];
        let mut dd = vec![0.0; 3];
        e[winner] = x;
        dd[winner] = 1.0 - x;
        let rule = if majority { DecisionRule::majority() } else { DecisionRule::Voter };
        let d = ode_rhs(&MeanFieldState::new(e, dd), &inst, gain, rule, 3);
        let flow = d.opinion_fractions();
        for (i, f) in flow.iter().enumerate() {
            prop_assert!(f.abs() < 1e-12, "option {} gains {}", i + 1, f);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulator_conserves_agents_and_is_deterministic(
        seed: u64,
        population in 2usize..40,
        majority: bool,
        with_replacement: bool,
        q2 in 0.2f64..1.0,
    ) {
        let inst = ProblemInstance::new(&[1.0, q2], &[1.0, 1.5], Interaction::Synergistic).unwrap();
        let config = SwarmConfig {
            population,
            seed,
            with_replacement,
            rule: if majority { DecisionRule::majority() } else { DecisionRule::Voter },
            trajectory_interval: Some(5.0),
            ..Default::default()
        };
        let mut events = 0u64;
        let mut last_time = 0.0;
        let record = run_observed(&config, &inst, &mut |t, counts| {
            events += 1;
            assert_eq!(counts.iter().sum::<u32>() as usize, population);
            assert!(t >= last_time);
            last_time = t;
        })
        .unwrap();
        prop_assert_eq!(events, record.events + 1);
        let again = run_observed(&config, &inst, &mut |_, _| {}).unwrap();
        prop_assert_eq!(&record, &again);
        if let Some(w) = record.winner {
            // tau = 1: everyone holds the winning opinion at the end
            let last = record.trajectory.len() - 1;
            let held = record.trajectory.opinion_counts(last);
            prop_assert_eq!(held[w.index()] as usize, population);
        }
    }

    #[test]
    fn antagonistic_best_set_is_the_brute_force_pareto_set(inst in instance()) {
        prop_assume!(classify_variant(&inst, EPS).unwrap() == bestofn::Variant::Antagonistic);
        let opts = inst.options();
        let oracle: Vec<u32> = (0..opts.len())
            .filter(|&b| {
                !opts.iter().any(|o| {
                    o.quality >= opts[b].quality
                        && o.cost <= opts[b].cost
                        && (o.quality > opts[b].quality || o.cost < opts[b].cost)
                })
            })
            .map(|b| b as u32 + 1)
            .collect();
        prop_assert_eq!(labels(&best_options(&inst, EPS).unwrap()), oracle);
    }
}
