//! Mean-field equations for the fraction of the swarm in each
//! (phase, option) compartment, integrated with fixed-step RK4.

use serde::{Deserialize, Serialize};

use super::decision::decision_outcome_distribution;
use super::MeanFieldError;
use crate::problem::{OptionId, ProblemInstance};
use crate::simulator::{InitialPhase, SwarmConfig};
use crate::strategy::DecisionRule;

/// Allowed drift of the total mass and of negative fractions.
pub const CONSERVATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    /// `e_i`: fraction exploring option `i`.
    pub exploration: Vec<f64>,
    /// `d_i`: fraction disseminating option `i`.
    pub dissemination: Vec<f64>,
}

impl MeanFieldState {
    pub fn new(exploration: Vec<f64>, dissemination: Vec<f64>) -> Self {
        assert_eq!(exploration.len(), dissemination.len());
        MeanFieldState {
            exploration,
            dissemination,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n], vec![0.0; n])
    }

    /// Initial state matching a swarm configuration: everyone exploring, or
    /// each opinion split by its long-run share of time per phase.
    pub fn from_config(config: &SwarmConfig, instance: &ProblemInstance) -> Self {
        let fractions = config.initial_fractions(instance.n());
        let mut state = Self::zeros(instance.n());
        for (i, (f, opt)) in fractions.iter().zip(instance.options()).enumerate() {
            match config.initial_phase {
                InitialPhase::Exploration => state.exploration[i] = *f,
                InitialPhase::Stationary => {
                    let share = config.gain * opt.quality / (opt.cost + config.gain * opt.quality);
                    state.dissemination[i] = f * share;
                    state.exploration[i] = f * (1.0 - share);
                }
            }
        }
        state
    }

    pub fn n(&self) -> usize {
        self.exploration.len()
    }

    pub fn total(&self) -> f64 {
        self.exploration.iter().chain(&self.dissemination).sum()
    }

    /// `e_i + d_i` for every option.
    pub fn opinion_fractions(&self) -> Vec<f64> {
        self.exploration.iter().zip(&self.dissemination).map(|(e, d)| e + d).collect()
    }

    fn to_vec(&self) -> Vec<f64> {
        self.exploration.iter().chain(&self.dissemination).copied().collect()
    }

    fn from_slice(y: &[f64]) -> Self {
        let n = y.len() / 2;
        Self::new(y[..n].to_vec(), y[n..].to_vec())
    }

    fn check(&self, time: f64) -> Result<(), MeanFieldError> {
        let drift = (self.total() - 1.0).abs();
        let most_negative = self
            .exploration
            .iter()
            .chain(&self.dissemination)
            .copied()
            .fold(0.0, f64::min);
        if drift > CONSERVATION_TOLERANCE || most_negative < -CONSERVATION_TOLERANCE || !drift.is_finite() {
            return Err(MeanFieldError::ToleranceExceeded {
                time,
                drift: drift.max(-most_negative),
            });
        }
        Ok(())
    }
}

/// Right-hand side of the mean-field equations:
///
/// ```text
/// de_i/dt = sum_j d_j / (g q_j) * w_{j->i}(p) - e_i / c_i
/// dd_i/dt = e_i / c_i - d_i / (g q_i)
/// ```
///
/// with `p = d / sum(d)` the opinion mix heard by a deciding agent and
/// `w_{j->i}` the decision outcome distribution for an agent of opinion `j`.
pub fn ode_rhs(
    state: &MeanFieldState,
    instance: &ProblemInstance,
    gain: f64,
    rule: DecisionRule,
    buffer_capacity: usize,
) -> MeanFieldState {
    let n = state.n();
    let mut de = vec![0.0; n];
    let mut dd = vec![0.0; n];
    let heard_total: f64 = state.dissemination.iter().sum();
    let p: Vec<f64> = if heard_total > 0.0 {
        state.dissemination.iter().map(|d| d / heard_total).collect()
    } else {
        vec![0.0; n]
    };
    for (j, opt) in instance.options().iter().enumerate() {
        let outflow = state.dissemination[j] / (gain * opt.quality);
        dd[j] -= outflow;
        if outflow != 0.0 {
            let size = if heard_total > 0.0 { buffer_capacity } else { 0 };
            let w = decision_outcome_distribution(rule, OptionId::from_index(j), &p, size);
            for (i, wi) in w.iter().enumerate() {
                de[i] += outflow * wi;
            }
        }
        let explored = state.exploration[j] / opt.cost;
        de[j] -= explored;
        dd[j] += explored;
    }
    MeanFieldState::new(de, dd)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
}

impl MeanFieldTrajectory {
    /// Linear interpolation of opinion fractions at time `t`.
    pub fn opinion_fractions_at(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return self.states[0].opinion_fractions();
        }
        if k == self.times.len() {
            return self.states[k - 1].opinion_fractions();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let a = self.states[k - 1].opinion_fractions();
        let b = self.states[k].opinion_fractions();
        let s = (t - t0) / (t1 - t0);
        a.iter().zip(&b).map(|(x, y)| x + s * (y - x)).collect()
    }
}

/// Integrates from `y0` over `[0, horizon]` with classical RK4 steps of
/// size `dt` (the last step is shortened to land on `horizon`), recording
/// every step.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    instance: &ProblemInstance,
    gain: f64,
    rule: DecisionRule,
    buffer_capacity: usize,
    y0: &MeanFieldState,
    horizon: f64,
    dt: f64,
) -> Result<MeanFieldTrajectory, MeanFieldError> {
    if !(dt > 0.0 && dt.is_finite()) || !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(MeanFieldError::InvalidArgument(format!(
            "need dt > 0 and horizon >= 0, got dt = {dt}, horizon = {horizon}"
        )));
    }
    if y0.n() != instance.n() {
        return Err(MeanFieldError::InvalidArgument(format!(
            "initial state has {} options, instance has {}",
            y0.n(),
            instance.n()
        )));
    }
    y0.check(0.0)?;

    let f = |y: &[f64]| ode_rhs(&MeanFieldState::from_slice(y), instance, gain, rule, buffer_capacity).to_vec();
    let axpy = |y: &[f64], h: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + h * b).collect() };

    let full_steps = (horizon / dt + 1e-9).floor() as u64;
    let mut times = vec![0.0];
    let mut states = vec![y0.clone()];
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let step = |y: &mut Vec<f64>, h: f64| {
        let k1 = f(y);
        let k2 = f(&axpy(y, h / 2.0, &k1));
        let k3 = f(&axpy(y, h / 2.0, &k2));
        let k4 = f(&axpy(y, h, &k3));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    };
    for k in 1..=full_steps {
        step(&mut y, dt);
        t = k as f64 * dt;
        let state = MeanFieldState::from_slice(&y);
        state.check(t)?;
        times.push(t);
        states.push(state);
    }
    let rest = horizon - t;
    if rest > 1e-12 {
        step(&mut y, rest);
        let state = MeanFieldState::from_slice(&y);
        state.check(horizon)?;
        times.push(horizon);
        states.push(state);
    }
    Ok(MeanFieldTrajectory { times, states })
}
