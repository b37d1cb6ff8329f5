use crate::problem::OptionId;
use crate::strategy::{plurality_index, DecisionRule};

/// Distribution of the option chosen by `rule` for an agent holding `own`
/// whose buffer contains `buffer_size` entries drawn i.i.d. from `p`.
///
/// The voter rule reproduces `p`. The majority rule is evaluated exactly by
/// summing multinomial weights over every buffer composition.
pub fn decision_outcome_distribution(rule: DecisionRule, own: OptionId, p: &[f64], buffer_size: usize) -> Vec<f64> {
    let n = p.len();
    let mut out = vec![0.0; n];
    if buffer_size == 0 {
        out[own.index()] = 1.0;
        return out;
    }
    match rule {
        DecisionRule::Voter => out.copy_from_slice(p),
        DecisionRule::Majority { include_self } => {
            let log_fact: Vec<f64> = (0..=buffer_size)
                .scan(0.0, |acc, k| {
                    if k > 0 {
                        *acc += (k as f64).ln();
                    }
                    Some(*acc)
                })
                .collect();
            let mut counts = vec![0u32; n];
            for_each_composition(buffer_size, &mut counts, 0, &mut |counts| {
                let mut weight = log_fact[buffer_size];
                let mut impossible = false;
                for (k, &c) in counts.iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    if p[k] <= 0.0 {
                        impossible = true;
                        break;
                    }
                    weight += f64::from(c) * p[k].ln() - log_fact[c as usize];
                }
                if impossible {
                    return;
                }
                let weight = weight.exp();
                let mut tally = counts.to_vec();
                if include_self {
                    tally[own.index()] += 1;
                }
                let winner = plurality_index(&tally).unwrap_or(own.index());
                out[winner] += weight;
            });
        }
    }
    out
}

/// Calls `f` with every vector of `counts.len()` non-negative integers
/// summing to `total`.
pub(crate) fn for_each_composition(total: usize, counts: &mut [u32], from: usize, f: &mut dyn FnMut(&[u32])) {
    let last = counts.len() - 1;
    if from == last {
        counts[last] = total as u32;
        f(counts);
        return;
    }
    for k in 0..=total {
        counts[from] = k as u32;
        for_each_composition(total - k, counts, from + 1, f);
    }
    counts[from] = 0;
}

/// Outcome distribution for one deciding agent in a finite swarm.
///
/// `dissemination` holds the number of disseminating agents per option,
/// including the deciding agent itself (whose opinion is `own`). The buffer
/// is drawn with replacement from the other disseminating agents; with no
/// other disseminator the buffer is empty and the agent keeps `own`.
pub fn finite_decision_distribution(
    rule: DecisionRule,
    own: OptionId,
    dissemination: &[u32],
    buffer_capacity: usize,
) -> Vec<f64> {
    let others: u32 = dissemination.iter().sum::<u32>() - 1;
    if others == 0 {
        return decision_outcome_distribution(rule, own, &vec![0.0; dissemination.len()], 0);
    }
    let p: Vec<f64> = dissemination
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let d = if k == own.index() { d - 1 } else { d };
            f64::from(d) / f64::from(others)
        })
        .collect();
    decision_outcome_distribution(rule, own, &p, buffer_capacity)
}
