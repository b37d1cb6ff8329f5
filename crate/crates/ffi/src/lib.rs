//! C ABI for the `bestofn` library.
//!
//! Every function returns a [`BonStatus`]; on failure a message is kept per
//! thread and can be read with [`bon_last_error_message`]. Objects are
//! opaque handles created by `*_new`/`*_from_json` functions and released
//! with the matching `*_free`. Passing a null handle to `*_free` is a no-op.
//!
//! Option labels are one-based, as in the Rust API.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bestofn::meanfield::{self, MeanFieldError, MeanFieldState, MeanFieldTrajectory};
use bestofn::problem::{self, Interaction, ProblemError, Variant};
use bestofn::simulator::{self, Batch, Engine, SimulationError};
use bestofn::{ProblemInstance, SwarmConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BonStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Parse = 4,
    Validation = 5,
    StateSpaceTooLarge = 6,
    ToleranceExceeded = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BonInteraction {
    NotApplicable = 0,
    Synergistic = 1,
    Antagonistic = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BonVariant {
    SymmetryBreaking = 0,
    CostAsymmetric = 1,
    QualityAsymmetric = 2,
    Synergistic = 3,
    Antagonistic = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BonEngine {
    Agents = 0,
    Ssa = 1,
}

/// Outcome of a single run. `winner` is 0 when the run did not decide.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BonRunResult {
    pub seed: u64,
    pub decided: bool,
    pub winner: u32,
    pub decision_time: f64,
    pub events: u64,
}

pub struct BonInstance(ProblemInstance);
pub struct BonConfig(SwarmConfig);
pub struct BonBatch(Batch);
pub struct BonTrajectory(MeanFieldTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(message).ok());
}

struct Failure(BonStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(BonStatus::NullPointer, format!("`{what}` is null"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure(BonStatus::InvalidArgument, message.into())
    }
}

impl From<ProblemError> for Failure {
    fn from(e: ProblemError) -> Self {
        Failure(BonStatus::Validation, e.to_string())
    }
}

impl From<MeanFieldError> for Failure {
    fn from(e: MeanFieldError) -> Self {
        let status = match e {
            MeanFieldError::StateSpaceTooLarge { .. } => BonStatus::StateSpaceTooLarge,
            MeanFieldError::ToleranceExceeded { .. } => BonStatus::ToleranceExceeded,
            MeanFieldError::InvalidArgument(_) | MeanFieldError::LinearSolve(_) => BonStatus::InvalidArgument,
            MeanFieldError::Problem(_) | MeanFieldError::Config(_) => BonStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

impl From<SimulationError> for Failure {
    fn from(e: SimulationError) -> Self {
        Failure(BonStatus::Validation, e.to_string())
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BonStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BonStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(format!("panic: {message}"));
            BonStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(BonStatus::InvalidUtf8, format!("`{what}`: {e}")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies `values` into the caller's buffer, failing with `BufferTooSmall`
/// when `capacity` is too small. `*len` always receives the required length.
unsafe fn fill<T: Copy>(values: &[T], buf: *mut T, capacity: usize, len: *mut usize) -> Result<(), Failure> {
    if !len.is_null() {
        *len = values.len();
    }
    if capacity < values.len() {
        return Err(Failure(
            BonStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", values.len()),
        ));
    }
    if !values.is_empty() {
        if buf.is_null() {
            return Err(Failure::null("buf"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    }
    Ok(())
}

fn parse_error(e: serde_json::Error) -> Failure {
    Failure(BonStatus::Parse, e.to_string())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bon_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL; 0 when there is none.
#[no_mangle]
pub extern "C" fn bon_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |m| m.as_bytes().len()))
}

/// Copies the last error message on this thread into `buf` as a
/// NUL-terminated string. Needs `bon_last_error_length() + 1` bytes.
///
/// # Safety
/// `buf` must point to `capacity` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bon_last_error_message(buf: *mut c_char, capacity: usize) -> BonStatus {
    let message = LAST_ERROR.with(|e| e.borrow().clone()).unwrap_or_default();
    let bytes = message.as_bytes_with_nul();
    if buf.is_null() {
        return BonStatus::NullPointer;
    }
    if capacity < bytes.len() {
        return BonStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, bytes.len());
    BonStatus::Ok
}

// Instances

/// Builds a validated instance from `n` qualities and costs.
///
/// # Safety
/// `quality` and `cost` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_instance_new(
    n: usize,
    quality: *const f64,
    cost: *const f64,
    interaction: BonInteraction,
    out: *mut *mut BonInstance,
) -> BonStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let quality = slice_arg(quality, n, "quality")?;
        let cost = slice_arg(cost, n, "cost")?;
        let interaction = match interaction {
            BonInteraction::NotApplicable => Interaction::NotApplicable,
            BonInteraction::Synergistic => Interaction::Synergistic,
            BonInteraction::Antagonistic => Interaction::Antagonistic,
        };
        let instance = ProblemInstance::new(quality, cost, interaction)?;
        *out = Box::into_raw(Box::new(BonInstance(instance)));
        Ok(())
    })
}

/// Parses an instance such as
/// `{"n":2,"quality":[1,0.5],"cost":[1,1],"interaction":"na"}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_instance_from_json(json: *const c_char, out: *mut *mut BonInstance) -> BonStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let instance: ProblemInstance = serde_json::from_str(str_arg(json, "json")?).map_err(parse_error)?;
        *out = Box::into_raw(Box::new(BonInstance(instance)));
        Ok(())
    })
}

/// # Safety
/// `instance` must be null or a handle from this library, freed only once.
#[no_mangle]
pub unsafe extern "C" fn bon_instance_free(instance: *mut BonInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// # Safety
/// `instance` must be a live handle; `n` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_instance_n(instance: *const BonInstance, n: *mut usize) -> BonStatus {
    guard(|| {
        *out(n, "n")? = borrow(instance, "instance")?.0.n();
        Ok(())
    })
}

/// # Safety
/// `instance` must be a live handle; `variant` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_instance_classify(
    instance: *const BonInstance,
    epsilon: f64,
    variant: *mut BonVariant,
) -> BonStatus {
    guard(|| {
        let v = problem::classify_variant(&borrow(instance, "instance")?.0, epsilon)?;
        *out(variant, "variant")? = match v {
            Variant::SymmetryBreaking => BonVariant::SymmetryBreaking,
            Variant::CostAsymmetric => BonVariant::CostAsymmetric,
            Variant::QualityAsymmetric => BonVariant::QualityAsymmetric,
            Variant::Synergistic => BonVariant::Synergistic,
            Variant::Antagonistic => BonVariant::Antagonistic,
        };
        Ok(())
    })
}

/// Writes the one-based labels of the best options into `buf`.
///
/// # Safety
/// `instance` must be a live handle; `buf` must hold `capacity` values and
/// `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_instance_best_options(
    instance: *const BonInstance,
    epsilon: f64,
    buf: *mut u32,
    capacity: usize,
    len: *mut usize,
) -> BonStatus {
    guard(|| {
        out(len, "len")?;
        let best = problem::best_options(&borrow(instance, "instance")?.0, epsilon)?;
        let labels: Vec<u32> = best.iter().map(|o| o.label()).collect();
        fill(&labels, buf, capacity, len)
    })
}

// Swarm configurations

/// A configuration with every field at its default.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_config_default(out: *mut *mut BonConfig) -> BonStatus {
    guard(|| {
        *self::out(out, "out")? = Box::into_raw(Box::new(BonConfig(SwarmConfig::default())));
        Ok(())
    })
}

/// Parses a swarm configuration; absent keys take their defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_config_from_json(json: *const c_char, out: *mut *mut BonConfig) -> BonStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let config: SwarmConfig = serde_json::from_str(str_arg(json, "json")?).map_err(parse_error)?;
        *out = Box::into_raw(Box::new(BonConfig(config)));
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bon_config_set_seed(config: *mut BonConfig, seed: u64) -> BonStatus {
    guard(|| {
        out(config, "config")?.0.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bon_config_set_population(config: *mut BonConfig, population: usize) -> BonStatus {
    guard(|| {
        out(config, "config")?.0.population = population;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle from this library, freed only once.
#[no_mangle]
pub unsafe extern "C" fn bon_config_free(config: *mut BonConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

// Simulation

/// Runs one agent-based simulation with the configuration's seed.
///
/// # Safety
/// `instance` and `config` must be live handles; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_simulate(
    instance: *const BonInstance,
    config: *const BonConfig,
    result: *mut BonRunResult,
) -> BonStatus {
    guard(|| {
        let result = out(result, "result")?;
        let r = simulator::run(&borrow(config, "config")?.0, &borrow(instance, "instance")?.0)?;
        *result = BonRunResult {
            seed: r.seed,
            decided: r.decided,
            winner: r.winner.map_or(0, |w| w.label()),
            decision_time: r.decision_time,
            events: r.events,
        };
        Ok(())
    })
}

/// Runs `repetitions` runs with seeds `seed_base + k`.
///
/// # Safety
/// `instance` and `config` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_batch_run(
    engine: BonEngine,
    instance: *const BonInstance,
    config: *const BonConfig,
    repetitions: usize,
    seed_base: u64,
    out: *mut *mut BonBatch,
) -> BonStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        if repetitions == 0 {
            return Err(Failure::invalid("repetitions must be at least 1"));
        }
        let engine = match engine {
            BonEngine::Agents => Engine::Agents,
            BonEngine::Ssa => Engine::Ssa,
        };
        let b = simulator::batch(
            engine,
            &borrow(config, "config")?.0,
            &borrow(instance, "instance")?.0,
            repetitions,
            seed_base,
        )?;
        *out = Box::into_raw(Box::new(BonBatch(b)));
        Ok(())
    })
}

/// # Safety
/// `batch` must be null or a handle from this library, freed only once.
#[no_mangle]
pub unsafe extern "C" fn bon_batch_free(batch: *mut BonBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// # Safety
/// `batch` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_batch_counts(batch: *const BonBatch, repetitions: *mut usize, decided: *mut usize) -> BonStatus {
    guard(|| {
        let m = &borrow(batch, "batch")?.0.metrics;
        *out(repetitions, "repetitions")? = m.repetitions;
        *out(decided, "decided")? = m.decided;
        Ok(())
    })
}

/// Per-option exit probabilities among decided runs.
///
/// # Safety
/// `batch` must be a live handle; `buf` must hold `capacity` doubles and
/// `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_batch_exit_probabilities(
    batch: *const BonBatch,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> BonStatus {
    guard(|| {
        out(len, "len")?;
        fill(&borrow(batch, "batch")?.0.metrics.exit_probability, buf, capacity, len)
    })
}

/// Mean decision time over decided runs; NaN when no run decided.
///
/// # Safety
/// `batch` must be a live handle; `mean` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_batch_mean_decision_time(batch: *const BonBatch, mean: *mut f64) -> BonStatus {
    guard(|| {
        *out(mean, "mean")? = borrow(batch, "batch")?.0.metrics.mean_decision_time.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// Copies run `index` of the batch.
///
/// # Safety
/// `batch` must be a live handle; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_batch_run_at(batch: *const BonBatch, index: usize, result: *mut BonRunResult) -> BonStatus {
    guard(|| {
        let runs = &borrow(batch, "batch")?.0.runs;
        let r = runs
            .get(index)
            .ok_or_else(|| Failure::invalid(format!("run {index} out of range ({} runs)", runs.len())))?;
        *out(result, "result")? = BonRunResult {
            seed: r.seed,
            decided: r.decided,
            winner: r.winner.map_or(0, |w| w.label()),
            decision_time: r.decision_time,
            events: r.events,
        };
        Ok(())
    })
}

// Predictive models

/// Exact exit probabilities and mean decision time of the finite swarm.
/// `state_limit` of 0 uses the library default.
///
/// # Safety
/// `instance` and `config` must be live handles; `probabilities` must hold
/// `capacity` doubles; `len` and `mean_time` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_absorb(
    instance: *const BonInstance,
    config: *const BonConfig,
    state_limit: usize,
    probabilities: *mut f64,
    capacity: usize,
    len: *mut usize,
    mean_time: *mut f64,
) -> BonStatus {
    guard(|| {
        out(len, "len")?;
        let mean_time = out(mean_time, "mean_time")?;
        let limit = if state_limit == 0 { meanfield::DEFAULT_STATE_LIMIT } else { state_limit };
        let r = meanfield::exact_absorption(&borrow(instance, "instance")?.0, &borrow(config, "config")?.0, limit)?;
        fill(&r.probabilities, probabilities, capacity, len)?;
        *mean_time = r.mean_time;
        Ok(())
    })
}

/// Integrates the mean-field equations from the configuration's initial
/// state over `[0, horizon]` with RK4 steps of `dt`.
///
/// # Safety
/// `instance` and `config` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_meanfield_integrate(
    instance: *const BonInstance,
    config: *const BonConfig,
    horizon: f64,
    dt: f64,
    out: *mut *mut BonTrajectory,
) -> BonStatus {
    guard(|| {
        let out = self::out(out, "out")?;
        let instance = &borrow(instance, "instance")?.0;
        let config = &borrow(config, "config")?.0;
        config.validate(instance).map_err(|e| Failure(BonStatus::Validation, e.to_string()))?;
        let y0 = MeanFieldState::from_config(config, instance);
        let traj = meanfield::integrate(instance, config.gain, config.rule, config.buffer_capacity, &y0, horizon, dt)?;
        *out = Box::into_raw(Box::new(BonTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `trajectory` must be null or a handle from this library, freed only once.
#[no_mangle]
pub unsafe extern "C" fn bon_trajectory_free(trajectory: *mut BonTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// # Safety
/// `trajectory` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_trajectory_len(trajectory: *const BonTrajectory, len: *mut usize) -> BonStatus {
    guard(|| {
        *out(len, "len")? = borrow(trajectory, "trajectory")?.0.times.len();
        Ok(())
    })
}

/// Time and opinion fractions `e_i + d_i` of step `index`.
///
/// # Safety
/// `trajectory` must be a live handle; `fractions` must hold `capacity`
/// doubles; `time` and `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bon_trajectory_point(
    trajectory: *const BonTrajectory,
    index: usize,
    time: *mut f64,
    fractions: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> BonStatus {
    guard(|| {
        out(len, "len")?;
        let time = out(time, "time")?;
        let traj = &borrow(trajectory, "trajectory")?.0;
        let state = traj
            .states
            .get(index)
            .ok_or_else(|| Failure::invalid(format!("step {index} out of range ({} steps)", traj.states.len())))?;
        fill(&state.opinion_fractions(), fractions, capacity, len)?;
        *time = traj.times[index];
        Ok(())
    })
}
