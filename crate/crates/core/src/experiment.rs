//! Experiment files and result files.
//!
//! An experiment file is a JSON object. Every key is optional except that
//! exactly one of `instance`, `scenario` or `scenario_file` must be given:
//!
//! ```json
//! {
//!   "command": "simulate",
//!   "instance": {"n": 2, "quality": [1, 0.5], "cost": [1, 1], "interaction": "na"},
//!   "swarm": {"population": 100, "gain": 10, "rule": {"type": "voter"}},
//!   "repetitions": 100,
//!   "sweep": {"parameter": "q_2", "values": [0.5, 0.75, 1.0]},
//!   "meanfield": {"horizon": 100, "dt": 0.01},
//!   "absorb": {"state_limit": 200000}
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meanfield::{self, AbsorptionResult, MeanFieldError, MeanFieldState, MeanFieldTrajectory};
use crate::problem::{OptionId, ProblemInstance};
use crate::scenarios::Scenario;
use crate::simulator::{self, BatchMetrics, ConfigError, Engine, RunRecord, SimulationError, SwarmConfig, Trajectory};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("invalid `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    MeanField(#[from] MeanFieldError),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl ExperimentError {
    fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ExperimentError::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<ConfigError> for ExperimentError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Invalid { field, reason } => ExperimentError::validation(field, reason),
        }
    }
}

/// Parses JSON, reporting unknown keys separately from other syntax errors.
pub fn parse_strict<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T, ExperimentError> {
    serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        if let Some(rest) = message.strip_prefix("unknown field `") {
            let key = rest.split('`').next().unwrap_or_default().to_string();
            return ExperimentError::UnknownKey { key };
        }
        let message = message.split(" at line ").next().unwrap_or_default().to_string();
        ExperimentError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message,
        }
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    #[default]
    Simulate,
    Ssa,
    Meanfield,
    Absorb,
    Sweep,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Simulate => "simulate",
            Command::Ssa => "ssa",
            Command::Meanfield => "meanfield",
            Command::Absorb => "absorb",
            Command::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown command `{s}`"))
    }
}

/// A sweepable parameter of the swarm configuration or the instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParameter {
    Population,
    Gain,
    BufferCapacity,
    Sigma,
    QMin,
    Tau,
    MaxTime,
    Quality(OptionId),
    Cost(OptionId),
}

impl SweepParameter {
    pub fn parse(name: &str, n_options: usize) -> Option<Self> {
        let option = |label: &str| {
            label
                .parse::<u32>()
                .ok()
                .filter(|&k| k >= 1 && k as usize <= n_options)
                .map(OptionId::new)
        };
        Some(match name {
            "population" | "N" => SweepParameter::Population,
            "gain" | "g" => SweepParameter::Gain,
            "buffer_capacity" | "G" => SweepParameter::BufferCapacity,
            "sigma" => SweepParameter::Sigma,
            "q_min" => SweepParameter::QMin,
            "tau" => SweepParameter::Tau,
            "max_time" => SweepParameter::MaxTime,
            _ => {
                if let Some(k) = name.strip_prefix("q_") {
                    SweepParameter::Quality(option(k)?)
                } else {
                    SweepParameter::Cost(option(name.strip_prefix("c_")?)?)
                }
            }
        })
    }

    fn is_integer(self) -> bool {
        matches!(self, SweepParameter::Population | SweepParameter::BufferCapacity)
    }

    /// Applies `value`, returning the modified configuration and instance.
    pub fn apply(
        self,
        value: f64,
        config: &SwarmConfig,
        instance: &ProblemInstance,
    ) -> (SwarmConfig, ProblemInstance) {
        let mut config = config.clone();
        let mut instance = instance.clone();
        match self {
            SweepParameter::Population => config.population = value as usize,
            SweepParameter::Gain => config.gain = value,
            SweepParameter::BufferCapacity => config.buffer_capacity = value as usize,
            SweepParameter::Sigma => config.sigma = value,
            SweepParameter::QMin => config.q_min = value,
            SweepParameter::Tau => config.tau = value,
            SweepParameter::MaxTime => config.max_time = value,
            SweepParameter::Quality(o) => instance = instance.with_quality(o, value),
            SweepParameter::Cost(o) => instance = instance.with_cost(o, value),
        }
        (config, instance)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub values: Vec<f64>,
    /// Model producing each sweep point.
    #[serde(default)]
    pub engine: Engine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldSettings {
    /// Integration horizon; `10 g` when absent.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    0.01
}

impl Default for MeanFieldSettings {
    fn default() -> Self {
        MeanFieldSettings {
            horizon: None,
            dt: default_dt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbSettings {
    #[serde(default = "default_state_limit")]
    pub state_limit: usize,
}

fn default_state_limit() -> usize {
    meanfield::DEFAULT_STATE_LIMIT
}

impl Default for AbsorbSettings {
    fn default() -> Self {
        AbsorbSettings {
            state_limit: default_state_limit(),
        }
    }
}

fn default_repetitions() -> usize {
    100
}

/// Experiment file as written on disk.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(default)]
    command: Command,
    #[serde(default)]
    instance: Option<ProblemInstance>,
    #[serde(default)]
    scenario: Option<Scenario>,
    #[serde(default)]
    scenario_file: Option<PathBuf>,
    #[serde(default)]
    swarm: SwarmConfig,
    #[serde(default = "default_repetitions")]
    repetitions: usize,
    #[serde(default)]
    sweep: Option<SweepSpec>,
    #[serde(default)]
    meanfield: MeanFieldSettings,
    #[serde(default)]
    absorb: AbsorbSettings,
    #[serde(default)]
    output: Option<PathBuf>,
}

/// Instance source found in a scenario file: a scenario description or a
/// plain instance.
#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    Scenario(Scenario),
    Instance(ProblemInstance),
}

/// A validated experiment with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub command: Command,
    pub instance: ProblemInstance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub swarm: SwarmConfig,
    pub repetitions: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    pub meanfield: MeanFieldSettings,
    pub absorb: AbsorbSettings,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

/// Reads and validates an experiment file.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_spec(&text, &path.display().to_string(), base)
}

/// Validates experiment JSON; relative `scenario_file` paths resolve
/// against `base`.
pub fn parse_spec(text: &str, origin: &str, base: &Path) -> Result<ExperimentSpec, ExperimentError> {
    let file: SpecFile = parse_strict(text, origin)?;
    let sources = [file.instance.is_some(), file.scenario.is_some(), file.scenario_file.is_some()];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return Err(ExperimentError::validation(
            "instance",
            "give exactly one of `instance`, `scenario` or `scenario_file`",
        ));
    }
    let (instance, scenario) = if let Some(instance) = file.instance {
        (instance, None)
    } else if let Some(scenario) = file.scenario {
        (build_scenario(&scenario)?, Some(scenario))
    } else {
        let rel = file.scenario_file.expect("checked above");
        let path = if rel.is_absolute() { rel } else { base.join(rel) };
        let text = fs::read_to_string(&path).map_err(|e| ExperimentError::io(&path, e))?;
        match parse_strict::<ScenarioFile>(&text, &path.display().to_string())? {
            ScenarioFile::Scenario(s) => (build_scenario(&s)?, Some(s)),
            ScenarioFile::Instance(i) => (i, None),
        }
    };

    let mut swarm = file.swarm;
    swarm.validate(&instance)?;
    swarm.initial_opinions = Some(swarm.initial_fractions(instance.n()));

    if file.repetitions < 1 {
        return Err(ExperimentError::validation("repetitions", "must be at least 1"));
    }
    if let Some(sweep) = &file.sweep {
        let param = SweepParameter::parse(&sweep.parameter, instance.n()).ok_or_else(|| {
            ExperimentError::validation(
                "sweep.parameter",
                format!("`{}` is not a swarm or instance parameter", sweep.parameter),
            )
        })?;
        if sweep.values.is_empty() {
            return Err(ExperimentError::validation("sweep.values", "must not be empty"));
        }
        for &v in &sweep.values {
            if param.is_integer() && (v.fract() != 0.0 || v < 0.0) {
                return Err(ExperimentError::validation("sweep.values", format!("{v} is not a count")));
            }
            let (c, i) = param.apply(v, &swarm, &instance);
            i.validate()
                .map_err(|e| ExperimentError::validation("sweep.values", format!("{v}: {e}")))?;
            c.validate(&i)
                .map_err(|e| ExperimentError::validation("sweep.values", format!("{v}: {e}")))?;
        }
    } else if file.command == Command::Sweep {
        return Err(ExperimentError::validation("sweep", "the sweep command needs a `sweep` section"));
    }
    if !(file.meanfield.dt > 0.0) {
        return Err(ExperimentError::validation("meanfield.dt", "must be positive"));
    }
    let horizon = file.meanfield.horizon.unwrap_or(10.0 * swarm.gain);
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ExperimentError::validation("meanfield.horizon", "must be positive"));
    }

    Ok(ExperimentSpec {
        command: file.command,
        instance,
        scenario,
        swarm,
        repetitions: file.repetitions,
        sweep: file.sweep,
        meanfield: MeanFieldSettings {
            horizon: Some(horizon),
            dt: file.meanfield.dt,
        },
        absorb: file.absorb,
        output: file.output,
    })
}

fn build_scenario(s: &Scenario) -> Result<ProblemInstance, ExperimentError> {
    s.build().map_err(|e| ExperimentError::validation("scenario", e.to_string()))
}

/// One row of a sweep table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub parameter: String,
    pub value: f64,
    pub metrics: BatchMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Results {
    Batch(BatchMetrics),
    MeanField {
        final_state: MeanFieldState,
        opinion_fractions: Vec<f64>,
    },
    Absorption(AbsorptionResult),
    Sweep(Vec<SweepRecord>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub version: &'static str,
    pub command: Command,
    pub seed: u64,
    pub config: ExperimentSpec,
    pub results: Results,
}

/// Runs the experiment and writes its result files into `out`. Returns the
/// summary that was written to `summary.json`.
pub fn execute(spec: &ExperimentSpec, out: &Path) -> Result<Summary, ExperimentError> {
    fs::create_dir_all(out).map_err(|e| ExperimentError::io(out, e))?;
    let n = spec.instance.n();
    let results = match spec.command {
        Command::Simulate | Command::Ssa => {
            let engine = if spec.command == Command::Ssa { Engine::Ssa } else { Engine::Agents };
            let b = simulator::batch(engine, &spec.swarm, &spec.instance, spec.repetitions, spec.swarm.seed)?;
            write_runs(&out.join("runs.csv"), &b.runs)?;
            if spec.swarm.trajectory_interval.is_some() {
                write_count_trajectory(&out.join("trajectory.csv"), &b.runs[0].trajectory)?;
            }
            Results::Batch(b.metrics)
        }
        Command::Meanfield => {
            let y0 = MeanFieldState::from_config(&spec.swarm, &spec.instance);
            let traj = meanfield::integrate(
                &spec.instance,
                spec.swarm.gain,
                spec.swarm.rule,
                spec.swarm.buffer_capacity,
                &y0,
                spec.meanfield.horizon.unwrap_or(10.0 * spec.swarm.gain),
                spec.meanfield.dt,
            )?;
            write_fraction_trajectory(&out.join("trajectory.csv"), &traj, n)?;
            let final_state = traj.states.last().expect("trajectory holds y0").clone();
            Results::MeanField {
                opinion_fractions: final_state.opinion_fractions(),
                final_state,
            }
        }
        Command::Absorb => {
            let r = meanfield::exact_absorption(&spec.instance, &spec.swarm, spec.absorb.state_limit)?;
            write_absorption(&out.join("absorption.csv"), &r)?;
            Results::Absorption(r)
        }
        Command::Sweep => {
            let sweep = spec.sweep.as_ref().expect("validated");
            let param = SweepParameter::parse(&sweep.parameter, n).expect("validated");
            let mut records = Vec::with_capacity(sweep.values.len());
            for &value in &sweep.values {
                let (config, instance) = param.apply(value, &spec.swarm, &spec.instance);
                let b = simulator::batch(sweep.engine, &config, &instance, spec.repetitions, spec.swarm.seed)?;
                records.push(SweepRecord {
                    parameter: sweep.parameter.clone(),
                    value,
                    metrics: b.metrics,
                });
            }
            write_sweep(&out.join("sweep.csv"), &records, n)?;
            Results::Sweep(records)
        }
    };
    let summary = Summary {
        version: VERSION,
        command: spec.command,
        seed: spec.swarm.seed,
        config: spec.clone(),
        results,
    };
    let path = out.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summary).expect("summary is serializable");
    json.push('\n');
    fs::write(&path, json).map_err(|e| ExperimentError::io(&path, e))?;
    Ok(summary)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, ExperimentError> {
    csv::Writer::from_path(path).map_err(|source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<(), ExperimentError> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| ExperimentError::io(path, e))
}

fn per_option(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

/// `seed, decided, winner, decision_time`; `winner` is empty for runs that
/// did not decide.
pub fn write_runs(path: &Path, runs: &[RunRecord]) -> Result<(), ExperimentError> {
    let header = ["seed", "decided", "winner", "decision_time"].map(String::from).to_vec();
    let rows = runs.iter().map(|r| {
        vec![
            r.seed.to_string(),
            u8::from(r.decided).to_string(),
            r.winner.map(|w| w.to_string()).unwrap_or_default(),
            r.decision_time.to_string(),
        ]
    });
    write_rows(path, header, rows)
}

/// `time, N_E_1..N_E_n, N_D_1..N_D_n`.
pub fn write_count_trajectory(path: &Path, trajectory: &Trajectory) -> Result<(), ExperimentError> {
    let n = trajectory.n_options;
    let header = std::iter::once("time".to_string())
        .chain(per_option("N_E_", n))
        .chain(per_option("N_D_", n))
        .collect();
    let rows = trajectory
        .rows()
        .map(|(t, row)| std::iter::once(t.to_string()).chain(row.iter().map(|c| c.to_string())).collect());
    write_rows(path, header, rows)
}

/// `time, e_1..e_n, d_1..d_n`.
pub fn write_fraction_trajectory(path: &Path, traj: &MeanFieldTrajectory, n: usize) -> Result<(), ExperimentError> {
    let header = std::iter::once("time".to_string())
        .chain(per_option("e_", n))
        .chain(per_option("d_", n))
        .collect();
    let rows = traj.times.iter().zip(&traj.states).map(|(t, s)| {
        std::iter::once(t.to_string())
            .chain(s.exploration.iter().chain(&s.dissemination).map(|x| x.to_string()))
            .collect()
    });
    write_rows(path, header, rows)
}

/// `option, probability, mean_time` where `mean_time` is conditional on
/// the outcome (empty when the outcome is impossible).
pub fn write_absorption(path: &Path, r: &AbsorptionResult) -> Result<(), ExperimentError> {
    let header = ["option", "probability", "mean_time"].map(String::from).to_vec();
    let rows = r
        .probabilities
        .iter()
        .zip(&r.conditional_mean_time)
        .enumerate()
        .map(|(i, (p, t))| vec![(i + 1).to_string(), p.to_string(), t.map(|t| t.to_string()).unwrap_or_default()]);
    write_rows(path, header, rows)
}

pub fn write_sweep(path: &Path, records: &[SweepRecord], n: usize) -> Result<(), ExperimentError> {
    let header = [
        "parameter",
        "value",
        "repetitions",
        "decided",
        "non_decision_rate",
        "mean_decision_time",
        "mean_decision_time_se",
    ]
    .map(String::from)
    .into_iter()
    .chain(per_option("exit_probability_", n))
    .chain(per_option("exit_probability_se_", n))
    .collect();
    let opt = |x: Option<f64>| x.map(|x| x.to_string()).unwrap_or_default();
    let rows = records.iter().map(|r| {
        let m = &r.metrics;
        [
            r.parameter.clone(),
            r.value.to_string(),
            m.repetitions.to_string(),
            m.decided.to_string(),
            m.non_decision_rate.to_string(),
            opt(m.mean_decision_time),
            opt(m.mean_decision_time_se),
        ]
        .into_iter()
        .chain(m.exit_probability.iter().map(|p| p.to_string()))
        .chain(m.exit_probability_se.iter().map(|p| p.to_string()))
        .collect()
    });
    write_rows(path, header, rows)
}
