//! The best-of-n problem: options, their quality and cost, and the five
//! problem variants that follow from how those two axes relate.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance used when comparing qualities or costs for equality.
pub const DEFAULT_EPSILON: f64 = 1e-9;

/// One-based identifier of an option within a [`ProblemInstance`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OptionId(u32);

impl OptionId {
    /// Builds an id from its one-based label.
    ///
    /// # Panics
    /// Panics if `label` is zero.
    pub fn new(label: u32) -> Self {
        assert!(label >= 1, "option labels are one-based");
        OptionId(label)
    }

    /// Builds an id from a zero-based position.
    pub fn from_index(index: usize) -> Self {
        OptionId(index as u32 + 1)
    }

    /// One-based label.
    pub fn label(self) -> u32 {
        self.0
    }

    /// Zero-based position, for indexing option vectors.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for OptionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Quality and cost of a single option.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptionProfile {
    /// Normalized quality in `(0, 1]`.
    pub quality: f64,
    /// Mean exploration duration, `> 0`.
    pub cost: f64,
}

/// Declared relationship between quality and cost when both are asymmetric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Interaction {
    #[serde(rename = "synergistic")]
    Synergistic,
    #[serde(rename = "antagonistic")]
    Antagonistic,
    #[serde(rename = "na")]
    NotApplicable,
}

/// The five variants of the best-of-n problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Equal quality and equal cost.
    SymmetryBreaking,
    /// Equal quality, different cost.
    CostAsymmetric,
    /// Equal cost, different quality.
    QualityAsymmetric,
    /// Both differ and the best option has max quality and min cost.
    Synergistic,
    /// Both differ and trade off against each other.
    Antagonistic,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Variant::SymmetryBreaking => "symmetry-breaking",
            Variant::CostAsymmetric => "cost-asymmetric",
            Variant::QualityAsymmetric => "quality-asymmetric",
            Variant::Synergistic => "synergistic",
            Variant::Antagonistic => "antagonistic",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("a best-of-n instance needs at least 2 options, got {0}")]
    TooFewOptions(usize),
    #[error("declared n = {n} but {field} has {len} entries")]
    LengthMismatch {
        n: usize,
        field: &'static str,
        len: usize,
    },
    #[error("quality of option {option} is {value}, expected a value in (0, 1]")]
    QualityOutOfRange { option: OptionId, value: f64 },
    #[error("cost of option {option} is {value}, expected a positive value")]
    NonPositiveCost { option: OptionId, value: f64 },
    #[error("qualities are not normalized: maximum quality is {0}, expected 1")]
    NotNormalized(f64),
    #[error("both quality and cost are asymmetric but no interaction was declared")]
    MissingInteraction,
    #[error("quality schedule entry at t = {time} is invalid: {reason}")]
    InvalidSchedule { time: f64, reason: String },
}

/// A piecewise-constant change of option qualities starting at `time`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityChange {
    pub time: f64,
    pub quality: Vec<f64>,
}

/// Binomial cell-inspection model used by collective-perception instances
/// in place of Gaussian quality noise.
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptionSampling {
    pub feature_fractions: Vec<f64>,
    pub sample_size: u32,
}

/// A complete best-of-n problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct ProblemInstance {
    options: Vec<OptionProfile>,
    interaction: Interaction,
    quality_schedule: Vec<QualityChange>,
    perception: Option<PerceptionSampling>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    n: usize,
    quality: Vec<f64>,
    cost: Vec<f64>,
    interaction: Interaction,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    quality_schedule: Vec<QualityChange>,
}

impl TryFrom<RawInstance> for ProblemInstance {
    type Error = ProblemError;

    fn try_from(raw: RawInstance) -> Result<Self, Self::Error> {
        if raw.n < 2 {
            return Err(ProblemError::TooFewOptions(raw.n));
        }
        for (field, len) in [("quality", raw.quality.len()), ("cost", raw.cost.len())] {
            if len != raw.n {
                return Err(ProblemError::LengthMismatch { n: raw.n, field, len });
            }
        }
        let instance = ProblemInstance::from_parts(&raw.quality, &raw.cost, raw.interaction)
            .with_quality_schedule(raw.quality_schedule);
        instance.validate()?;
        Ok(instance)
    }
}

impl From<ProblemInstance> for RawInstance {
    fn from(instance: ProblemInstance) -> Self {
        RawInstance {
            n: instance.n(),
            quality: instance.qualities(),
            cost: instance.costs(),
            interaction: instance.interaction,
            quality_schedule: instance.quality_schedule,
        }
    }
}

impl ProblemInstance {
    /// Assembles an instance without checking it. Call [`validate`](Self::validate)
    /// before using it, or use [`new`](Self::new).
    pub fn from_parts(quality: &[f64], cost: &[f64], interaction: Interaction) -> Self {
        let options = quality
            .iter()
            .zip(cost)
            .map(|(&quality, &cost)| OptionProfile { quality, cost })
            .collect();
        ProblemInstance {
            options,
            interaction,
            quality_schedule: Vec::new(),
            perception: None,
        }
    }

    /// Builds and validates an instance. Qualities must already be normalized.
    pub fn new(quality: &[f64], cost: &[f64], interaction: Interaction) -> Result<Self, ProblemError> {
        if quality.len() != cost.len() {
            return Err(ProblemError::LengthMismatch {
                n: quality.len(),
                field: "cost",
                len: cost.len(),
            });
        }
        let instance = Self::from_parts(quality, cost, interaction);
        instance.validate()?;
        Ok(instance)
    }

    /// Builds an instance from raw (positive, unnormalized) qualities by
    /// dividing every quality by the largest one.
    pub fn normalized(raw_quality: &[f64], cost: &[f64], interaction: Interaction) -> Result<Self, ProblemError> {
        let max = raw_quality.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > 0.0 && max.is_finite()) {
            let (i, &value) = raw_quality
                .iter()
                .enumerate()
                .find(|(_, q)| !(**q > 0.0 && q.is_finite()))
                .unwrap_or((0, &max));
            if raw_quality.len() < 2 {
                return Err(ProblemError::TooFewOptions(raw_quality.len()));
            }
            return Err(ProblemError::QualityOutOfRange {
                option: OptionId::from_index(i),
                value,
            });
        }
        let quality: Vec<f64> = raw_quality.iter().map(|q| q / max).collect();
        Self::new(&quality, cost, interaction)
    }

    pub fn with_quality_schedule(mut self, schedule: Vec<QualityChange>) -> Self {
        self.quality_schedule = schedule;
        self
    }

    pub(crate) fn with_perception(mut self, perception: PerceptionSampling) -> Self {
        self.perception = Some(perception);
        self
    }

    /// Checks every structural invariant and reports the first violation.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let n = self.n();
        if n < 2 {
            return Err(ProblemError::TooFewOptions(n));
        }
        for (i, opt) in self.options.iter().enumerate() {
            if !(opt.quality > 0.0 && opt.quality <= 1.0) {
                return Err(ProblemError::QualityOutOfRange {
                    option: OptionId::from_index(i),
                    value: opt.quality,
                });
            }
            if !(opt.cost > 0.0 && opt.cost.is_finite()) {
                return Err(ProblemError::NonPositiveCost {
                    option: OptionId::from_index(i),
                    value: opt.cost,
                });
            }
        }
        let max = self.options.iter().map(|o| o.quality).fold(0.0, f64::max);
        if (max - 1.0).abs() > DEFAULT_EPSILON {
            return Err(ProblemError::NotNormalized(max));
        }
        let mut last = f64::NEG_INFINITY;
        for change in &self.quality_schedule {
            let invalid = |reason: &str| ProblemError::InvalidSchedule {
                time: change.time,
                reason: reason.to_string(),
            };
            if !(change.time >= 0.0 && change.time.is_finite()) || change.time <= last {
                return Err(invalid("times must be finite, non-negative and strictly increasing"));
            }
            if change.quality.len() != n {
                return Err(invalid("quality vector length differs from n"));
            }
            if change.quality.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) {
                return Err(invalid("qualities must lie in (0, 1]"));
            }
            last = change.time;
        }
        Ok(())
    }

    /// Number of options.
    pub fn n(&self) -> usize {
        self.options.len()
    }

    pub fn options(&self) -> &[OptionProfile] {
        &self.options
    }

    pub fn option(&self, id: OptionId) -> &OptionProfile {
        &self.options[id.index()]
    }

    pub fn option_ids(&self) -> impl Iterator<Item = OptionId> + '_ {
        (0..self.n()).map(OptionId::from_index)
    }

    pub fn qualities(&self) -> Vec<f64> {
        self.options.iter().map(|o| o.quality).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.options.iter().map(|o| o.cost).collect()
    }

    pub fn interaction(&self) -> Interaction {
        self.interaction
    }

    pub fn quality_schedule(&self) -> &[QualityChange] {
        &self.quality_schedule
    }

    pub fn perception(&self) -> Option<&PerceptionSampling> {
        self.perception.as_ref()
    }

    /// True quality of `option` at time `t`, honoring the quality schedule.
    pub fn quality_at(&self, option: OptionId, t: f64) -> f64 {
        self.quality_schedule
            .iter()
            .rev()
            .find(|change| change.time <= t)
            .map(|change| change.quality[option.index()])
            .unwrap_or(self.options[option.index()].quality)
    }

    /// Returns a copy with quality of `option` replaced. The result is not
    /// validated.
    pub fn with_quality(&self, option: OptionId, quality: f64) -> Self {
        let mut out = self.clone();
        out.options[option.index()].quality = quality;
        out
    }

    /// Returns a copy with cost of `option` replaced. The result is not
    /// validated.
    pub fn with_cost(&self, option: OptionId, cost: f64) -> Self {
        let mut out = self.clone();
        out.options[option.index()].cost = cost;
        out
    }

    /// Returns the instance with options reordered so that new option `k`
    /// is old option `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n());
        let mut out = self.clone();
        out.options = perm.iter().map(|&p| self.options[p]).collect();
        for change in &mut out.quality_schedule {
            change.quality = perm.iter().map(|&p| change.quality[p]).collect();
        }
        if let Some(perception) = &mut out.perception {
            perception.feature_fractions = perm.iter().map(|&p| perception.feature_fractions[p]).collect();
        }
        out
    }
}

fn spread(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let max = values.fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

// Costs are compared relative to the largest cost so that rescaling the time
// unit never changes the classification. Qualities are normalized, so the
// absolute and relative comparisons coincide.
fn costs_symmetric(instance: &ProblemInstance, epsilon: f64) -> bool {
    let (min, max) = spread(instance.options.iter().map(|o| o.cost));
    max - min <= epsilon * max
}

fn qualities_symmetric(instance: &ProblemInstance, epsilon: f64) -> bool {
    let (min, max) = spread(instance.options.iter().map(|o| o.quality));
    max - min <= epsilon
}

/// Classifies a validated instance into one of the five variants.
pub fn classify_variant(instance: &ProblemInstance, epsilon: f64) -> Result<Variant, ProblemError> {
    instance.validate()?;
    let q_sym = qualities_symmetric(instance, epsilon);
    let c_sym = costs_symmetric(instance, epsilon);
    Ok(match (q_sym, c_sym) {
        (true, true) => Variant::SymmetryBreaking,
        (true, false) => Variant::CostAsymmetric,
        (false, true) => Variant::QualityAsymmetric,
        (false, false) => match instance.interaction {
            Interaction::Synergistic => Variant::Synergistic,
            Interaction::Antagonistic => Variant::Antagonistic,
            Interaction::NotApplicable => return Err(ProblemError::MissingInteraction),
        },
    })
}

/// Options that count as "best" for the instance's variant.
///
/// For the antagonistic variant this is the Pareto set under (maximize
/// quality, minimize cost). A synergistic declaration whose numbers do not
/// actually have a common max-quality/min-cost option also falls back to the
/// Pareto set.
pub fn best_options(instance: &ProblemInstance, epsilon: f64) -> Result<Vec<OptionId>, ProblemError> {
    let variant = classify_variant(instance, epsilon)?;
    let opts = &instance.options;
    let (min_cost, _) = spread(opts.iter().map(|o| o.cost));
    let (_, max_cost) = spread(opts.iter().map(|o| o.cost));
    let (_, max_quality) = spread(opts.iter().map(|o| o.quality));
    let cheapest = |o: &OptionProfile| o.cost - min_cost <= epsilon * max_cost;
    let finest = |o: &OptionProfile| max_quality - o.quality <= epsilon;

    let pick = |pred: &dyn Fn(&OptionProfile) -> bool| -> Vec<OptionId> {
        opts.iter()
            .enumerate()
            .filter(|(_, o)| pred(o))
            .map(|(i, _)| OptionId::from_index(i))
            .collect()
    };

    let best = match variant {
        Variant::SymmetryBreaking => pick(&|_| true),
        Variant::CostAsymmetric => pick(&cheapest),
        Variant::QualityAsymmetric => pick(&finest),
        Variant::Synergistic => {
            let both = pick(&|o| cheapest(o) && finest(o));
            if both.is_empty() {
                pareto_set(instance, epsilon)
            } else {
                both
            }
        }
        Variant::Antagonistic => pareto_set(instance, epsilon),
    };
    Ok(best)
}

/// Options not dominated under (maximize quality, minimize cost).
pub fn pareto_set(instance: &ProblemInstance, epsilon: f64) -> Vec<OptionId> {
    let opts = &instance.options;
    let max_cost = opts.iter().map(|o| o.cost).fold(0.0, f64::max);
    let dominates = |a: &OptionProfile, b: &OptionProfile| {
        let q_tol = epsilon;
        let c_tol = epsilon * max_cost;
        let no_worse = a.quality >= b.quality - q_tol && a.cost <= b.cost + c_tol;
        let better = a.quality > b.quality + q_tol || a.cost < b.cost - c_tol;
        no_worse && better
    };
    (0..opts.len())
        .filter(|&i| !(0..opts.len()).any(|j| j != i && dominates(&opts[j], &opts[i])))
        .map(OptionId::from_index)
        .collect()
}
