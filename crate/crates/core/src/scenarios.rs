//! Builders for three application scenarios: shortest path, site selection
//! and collective perception.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{Interaction, OptionId, PerceptionSampling, ProblemError, ProblemInstance, DEFAULT_EPSILON};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("{field}[{index}] = {value} must be positive")]
    NonPositive { field: &'static str, index: usize, value: f64 },
    #[error("feature fractions sum to {0}, expected 1")]
    FractionsDoNotSumToOne(f64),
    #[error("feature {0} has zero abundance and could never be observed")]
    ZeroFraction(OptionId),
    #[error("sample size must be at least 1")]
    ZeroSampleSize,
    #[error("cost vector has {got} entries but the scenario has {expected} options")]
    CostLength { expected: usize, got: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn default_unit() -> f64 {
    1.0
}

fn default_sample_size() -> u32 {
    10
}

/// Two or more paths between a source and a destination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathScenario {
    pub lengths: Vec<f64>,
    /// Traversal time of the shortest path.
    #[serde(default = "default_unit")]
    pub base_time: f64,
}

/// Candidate sites whose quality is proportional to their area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteScenario {
    pub areas: Vec<f64>,
    /// Discovery time of the largest site.
    #[serde(default = "default_unit")]
    pub discovery_base: f64,
}

/// An environment covered by features in the given proportions. Each
/// exploration inspects `sample_size` random cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerceptionScenario {
    #[serde(alias = "featureFractions")]
    pub feature_fractions: Vec<f64>,
    #[serde(alias = "sampleSize", default = "default_sample_size")]
    pub sample_size: u32,
    /// Optional per-feature exploration cost; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<Interaction>,
}

/// Scenario file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Scenario {
    ShortestPath(PathScenario),
    SiteSelection(SiteScenario),
    CollectivePerception(PerceptionScenario),
}

impl Scenario {
    pub fn build(&self) -> Result<ProblemInstance, ScenarioError> {
        match self {
            Scenario::ShortestPath(s) => build_shortest_path(s),
            Scenario::SiteSelection(s) => build_site_selection(s),
            Scenario::CollectivePerception(s) => build_collective_perception(s),
        }
    }
}

fn check_positive(field: &'static str, values: &[f64]) -> Result<(), ScenarioError> {
    if values.len() < 2 {
        return Err(ProblemError::TooFewOptions(values.len()).into());
    }
    match values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        Some((index, &value)) => Err(ScenarioError::NonPositive { field, index, value }),
        None => Ok(()),
    }
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// All paths are equally good; longer paths take longer to traverse.
pub fn build_shortest_path(s: &PathScenario) -> Result<ProblemInstance, ScenarioError> {
    check_positive("lengths", &s.lengths)?;
    check_positive("base_time", &[s.base_time, s.base_time])?;
    let shortest = min_of(&s.lengths);
    let cost: Vec<f64> = s.lengths.iter().map(|l| s.base_time * l / shortest).collect();
    let quality = vec![1.0; s.lengths.len()];
    Ok(ProblemInstance::new(&quality, &cost, Interaction::NotApplicable)?)
}

/// Larger sites are both better and easier to discover.
pub fn build_site_selection(s: &SiteScenario) -> Result<ProblemInstance, ScenarioError> {
    check_positive("areas", &s.areas)?;
    check_positive("discovery_base", &[s.discovery_base, s.discovery_base])?;
    let largest = max_of(&s.areas);
    let quality: Vec<f64> = s.areas.iter().map(|a| a / largest).collect();
    let cost: Vec<f64> = s.areas.iter().map(|a| s.discovery_base * largest / a).collect();
    let symmetric = largest - min_of(&s.areas) <= DEFAULT_EPSILON * largest;
    let interaction = if symmetric {
        Interaction::NotApplicable
    } else {
        Interaction::Synergistic
    };
    Ok(ProblemInstance::new(&quality, &cost, interaction)?)
}

fn check_perception(s: &PerceptionScenario) -> Result<(), ScenarioError> {
    if s.feature_fractions.len() < 2 {
        return Err(ProblemError::TooFewOptions(s.feature_fractions.len()).into());
    }
    if s.sample_size == 0 {
        return Err(ScenarioError::ZeroSampleSize);
    }
    if let Some((index, &value)) = s
        .feature_fractions
        .iter()
        .enumerate()
        .find(|(_, f)| !(**f >= 0.0 && f.is_finite()))
    {
        return Err(ScenarioError::NonPositive {
            field: "feature_fractions",
            index,
            value,
        });
    }
    let total: f64 = s.feature_fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(ScenarioError::FractionsDoNotSumToOne(total));
    }
    if let Some(index) = s.feature_fractions.iter().position(|&f| f == 0.0) {
        return Err(ScenarioError::ZeroFraction(OptionId::from_index(index)));
    }
    Ok(())
}

/// Quality is the abundance of each feature relative to the most common one.
pub fn build_collective_perception(s: &PerceptionScenario) -> Result<ProblemInstance, ScenarioError> {
    check_perception(s)?;
    let n = s.feature_fractions.len();
    let most = max_of(&s.feature_fractions);
    let quality: Vec<f64> = s.feature_fractions.iter().map(|f| f / most).collect();
    let cost = match &s.cost {
        Some(c) if c.len() != n => return Err(ScenarioError::CostLength { expected: n, got: c.len() }),
        Some(c) => c.clone(),
        None => vec![1.0; n],
    };
    let interaction = s.interaction.unwrap_or(Interaction::NotApplicable);
    let instance = ProblemInstance::new(&quality, &cost, interaction)?.with_perception(PerceptionSampling {
        feature_fractions: s.feature_fractions.clone(),
        sample_size: s.sample_size,
    });
    Ok(instance)
}

/// Inspects `sample_size` cells and returns the observed abundance of
/// `option` relative to the most common feature, clamped to `[q_min, 1]`.
pub fn perception_quality_sampler<R: Rng + ?Sized>(
    s: &PerceptionScenario,
    option: OptionId,
    q_min: f64,
    rng: &mut R,
) -> f64 {
    let sampling = PerceptionSampling {
        feature_fractions: s.feature_fractions.clone(),
        sample_size: s.sample_size,
    };
    sample_perceived_quality(&sampling, option, q_min, rng)
}

/// Unclamped estimate `(k / m) / max_fraction` with `k ~ Binomial(m, f)`.
pub fn raw_perceived_quality<R: Rng + ?Sized>(sampling: &PerceptionSampling, option: OptionId, rng: &mut R) -> f64 {
    let fraction = sampling.feature_fractions[option.index()];
    let most = max_of(&sampling.feature_fractions);
    let m = sampling.sample_size;
    let k = Binomial::new(u64::from(m), fraction)
        .expect("fractions are validated to lie in [0, 1]")
        .sample(rng);
    (k as f64 / f64::from(m)) / most
}

pub(crate) fn sample_perceived_quality<R: Rng + ?Sized>(
    sampling: &PerceptionSampling,
    option: OptionId,
    q_min: f64,
    rng: &mut R,
) -> f64 {
    raw_perceived_quality(sampling, option, rng).clamp(q_min, 1.0)
}
