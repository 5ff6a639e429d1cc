//! The two loop drivers.
//!
//! * [`ldsd_step`]: directional-derivative mode. Draws `K` directions from
//!   the policy, steps `x` along the K-sample projection average of the
//!   exact gradient and ascends the policy mean on the alignment reward.
//! * [`zo_ldsd_step`]: forward-only mode. Probes `K` directions, keeps the
//!   one with the lowest forward value, builds a two-point estimate along it
//!   and feeds that to a [`PluginRule`]. The policy mean is updated from the
//!   same probes with leave-one-out advantages. `K + 1` oracle calls.
//!
//! [`run`] drives either mode under an iteration horizon or an oracle-call
//! budget and emits one [`TraceRecord`] per iteration.

mod plugin;

pub use plugin::{apply_plugin, PluginBuffers, PluginRule};

use std::f64::consts::PI;

use crate::alignlab::mc_expected_alignment;
use crate::error::{Error, Result};
use crate::estimators::{
    dgd_estimate, reinforce_mu_grad, reinforce_mu_grad_loo, select_best_direction, zo_gradient, BaselineKind,
    RewardSign,
};
use crate::objective::Objective;
use crate::rng::{stream, Rng, Stream};
use crate::sampling::{alignment, init_mu, sample_directions, Direction, MuInit, SamplingPolicy, DEGENERATE_NORM};
use crate::trace::{TraceRecord, TraceSink};
use crate::vector::{axpy, cosine, norm, ParamVector};

/// Redraws allowed when a batch contains a zero-norm direction.
const MAX_RESAMPLES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Constant,
    /// `γ_x(t) = γ_x · ½(1 + cos(π t / T))`; `γ_μ` stays constant.
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub gamma_x: f64,
    pub gamma_mu: f64,
    pub schedule: Schedule,
}

impl StepSizes {
    pub fn constant(gamma_x: f64, gamma_mu: f64) -> Self {
        Self { gamma_x, gamma_mu, schedule: Schedule::Constant }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_x > 0.0) || !self.gamma_x.is_finite() {
            return Err(Error::NonPositive { name: "gamma_x", value: self.gamma_x });
        }
        if !(self.gamma_mu >= 0.0) || !self.gamma_mu.is_finite() {
            return Err(Error::OutOfRange { name: "gamma_mu", msg: format!("{} must be >= 0", self.gamma_mu) });
        }
        Ok(())
    }

    pub fn gamma_x_at(&self, t: u64, horizon: Option<u64>) -> Result<f64> {
        match self.schedule {
            Schedule::Constant => Ok(self.gamma_x),
            Schedule::Cosine => {
                let horizon = horizon.ok_or_else(|| Error::OutOfRange {
                    name: "schedule",
                    msg: "cosine schedule needs a known horizon".into(),
                })?;
                let frac = t.min(horizon) as f64 / horizon.max(1) as f64;
                Ok(self.gamma_x * 0.5 * (1.0 + (PI * frac).cos()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub x: ParamVector,
    pub policy: SamplingPolicy,
    pub buffers: PluginBuffers,
    /// Completed iterations.
    pub t: u64,
    pub oracle_calls: u64,
    pub horizon: Option<u64>,
    pub skipped_steps: u64,
    pub degenerate_resamples: u64,
}

impl OptimizerState {
    pub fn new(x: ParamVector, policy: SamplingPolicy) -> Result<Self> {
        crate::vector::check_dim(x.dim(), policy.dim())?;
        let buffers = PluginBuffers::zeros(x.dim());
        Ok(Self { x, policy, buffers, t: 0, oracle_calls: 0, horizon: None, skipped_steps: 0, degenerate_resamples: 0 })
    }
}

/// What a single step did, for telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Gradient estimate handed to the `x` update (`None` when skipped).
    pub g_x: Option<ParamVector>,
    pub skipped: bool,
    /// Exact gradient at the pre-step iterate, when the step computed it.
    pub grad: Option<Vec<f64>>,
    /// Per-direction alignment `C_k` (directional mode only).
    pub alignments: Vec<f64>,
}

fn draw_batch(state: &mut OptimizerState, k: usize, need_units: bool, rng: &mut Rng) -> Result<Vec<Direction>> {
    for _ in 0..MAX_RESAMPLES {
        let dirs = sample_directions(&state.policy, k, rng)?;
        if !need_units || dirs.iter().all(|d| !d.is_degenerate()) {
            return Ok(dirs);
        }
        state.degenerate_resamples += 1;
    }
    Err(Error::DegenerateDirection { norm: 0.0 })
}

/// One directional-derivative iteration. Charges `K` directional-oracle
/// calls.
pub fn ldsd_step(
    state: &mut OptimizerState,
    oracle: &dyn Objective,
    steps: &StepSizes,
    k: usize,
    baseline: BaselineKind,
    rng: &mut Rng,
) -> Result<StepReport> {
    if k == 0 || (steps.gamma_mu > 0.0 && k < 2) {
        return Err(Error::TooFewSamples { needed: if steps.gamma_mu > 0.0 { 2 } else { 1 }, got: k });
    }
    let grad = oracle.gradient(&state.x).ok_or(Error::MissingGradient)?;
    crate::vector::check_dim(state.x.dim(), grad.len())?;
    let gamma_x = steps.gamma_x_at(state.t, state.horizon)?;
    state.oracle_calls += k as u64;

    if norm(&grad) < DEGENERATE_NORM {
        state.t += 1;
        state.skipped_steps += 1;
        return Ok(StepReport { g_x: None, skipped: true, grad: Some(grad), alignments: Vec::new() });
    }

    let dirs = draw_batch(state, k, true, rng)?;
    let alignments = dirs.iter().map(|d| alignment(&d.raw, &grad)).collect::<Result<Vec<f64>>>()?;
    let g_x = dgd_estimate(&grad, &dirs)?;

    if steps.gamma_mu > 0.0 {
        let est = reinforce_mu_grad(&state.policy, &dirs, &alignments, baseline)?;
        state.policy.ascend(steps.gamma_mu, &est.g_mu)?;
    }
    let mut x = state.x.to_vec();
    axpy(-gamma_x, &g_x, &mut x);
    state.x = ParamVector::new(x).map_err(|_| Error::NonFinite("iterate"))?;
    state.t += 1;
    Ok(StepReport { g_x: Some(g_x), skipped: false, grad: Some(grad), alignments })
}

/// Settings of the forward-only driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoSettings {
    pub k: usize,
    pub tau: f64,
    pub plugin: PluginRule,
    pub reward_sign: RewardSign,
    /// Use `v̄*` instead of the raw `v*` in the gradient estimate.
    pub normalize: bool,
}

/// One forward-only iteration: `K + 1` oracle calls.
///
/// With `gamma_mu = 0` the policy is frozen and `K = 1` is allowed; this is
/// how the Gaussian-sampling baselines run.
pub fn zo_ldsd_step(
    state: &mut OptimizerState,
    oracle: &dyn Objective,
    steps: &StepSizes,
    zo: &ZoSettings,
    rng: &mut Rng,
) -> Result<StepReport> {
    let needed = if steps.gamma_mu > 0.0 { 2 } else { 1 };
    if zo.k < needed {
        return Err(Error::TooFewSamples { needed, got: zo.k });
    }
    let gamma_x = steps.gamma_x_at(state.t, state.horizon)?;
    let dirs = draw_batch(state, zo.k, zo.normalize, rng)?;
    let sel = select_best_direction(oracle, &state.x, dirs, zo.tau)?;
    let g_x = zo_gradient(oracle, &state.x, sel.direction(), zo.tau, Some(sel.forward_value()), zo.normalize)?;
    state.oracle_calls += zo.k as u64 + 1;

    if steps.gamma_mu > 0.0 {
        let est = reinforce_mu_grad_loo(&state.policy, &sel.probes, zo.reward_sign)?;
        state.policy.ascend(steps.gamma_mu, &est.g_mu)?;
    }
    let delta = apply_plugin(&zo.plugin, &mut state.buffers, &g_x, gamma_x, state.t + 1)?;
    let mut x = state.x.to_vec();
    axpy(1.0, &delta, &mut x);
    state.x = ParamVector::new(x).map_err(|_| Error::NonFinite("iterate"))?;
    state.t += 1;
    Ok(StepReport { g_x: Some(g_x), skipped: false, grad: None, alignments: Vec::new() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Ldsd { k: usize, baseline: BaselineKind },
    ZoLdsd(ZoSettings),
}

impl Method {
    /// Oracle calls charged per iteration.
    pub fn calls_per_iteration(&self) -> u64 {
        match self {
            Method::Ldsd { k, .. } => *k as u64,
            Method::ZoLdsd(zo) => zo.k as u64 + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    Horizon(u64),
    /// Maximum number of oracle calls.
    Budget(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub method: Method,
    pub steps: StepSizes,
    pub epsilon: f64,
    pub mu_init: MuInit,
    /// Norm of `μ⁰` for the non-zero initializations.
    pub mu_scale: f64,
    /// Samples per `mc_alignment` telemetry estimate; zero disables it.
    pub telemetry_samples: usize,
}

/// Number of iterations a stopping rule allows.
pub fn iterations_for(method: &Method, stop: Stop) -> Result<u64> {
    let per_iter = method.calls_per_iteration();
    match stop {
        Stop::Horizon(t) => Ok(t),
        Stop::Budget(b) if b < per_iter => Err(Error::BudgetTooSmall { budget: b, per_iter }),
        Stop::Budget(b) => Ok(b / per_iter),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub state: OptimizerState,
    pub iterations: u64,
}

/// Runs `cfg` from `x0` until `stop`, streaming telemetry to `sink`.
///
/// All randomness derives from `seed`: directions, policy initialization and
/// telemetry each use their own stream, so telemetry settings never change
/// the optimization path.
pub fn run(
    cfg: &OptimizerConfig,
    oracle: &dyn Objective,
    x0: ParamVector,
    stop: Stop,
    seed: u64,
    run_id: &str,
    sink: &mut dyn TraceSink,
) -> Result<RunOutcome> {
    cfg.steps.validate()?;
    if let Method::ZoLdsd(zo) = &cfg.method {
        zo.plugin.validate()?;
    }
    crate::vector::check_dim(oracle.dim(), x0.dim())?;
    let iterations = iterations_for(&cfg.method, stop)?;

    let mut init_rng = stream(seed, Stream::PolicyInit);
    let grad0 = oracle.gradient(&x0);
    if !(cfg.mu_scale > 0.0) || !cfg.mu_scale.is_finite() {
        return Err(Error::NonPositive { name: "mu_scale", value: cfg.mu_scale });
    }
    let mu0 = init_mu(cfg.mu_init, x0.dim(), grad0.as_deref(), &mut init_rng)?;
    let mu0 = ParamVector::new(mu0.iter().map(|m| cfg.mu_scale * m).collect())?;
    let policy = SamplingPolicy::new(mu0, cfg.epsilon)?;
    let mut state = OptimizerState::new(x0, policy)?;
    state.horizon = Some(iterations);

    let mut rng = stream(seed, Stream::Directions);
    let mut telemetry_rng = stream(seed, Stream::Telemetry);

    for _ in 0..iterations {
        let loss = oracle.value(&state.x);
        let mu_norm = state.policy.mu().norm();
        let policy_before = state.policy.clone();
        let report = match &cfg.method {
            Method::Ldsd { k, baseline } => ldsd_step(&mut state, oracle, &cfg.steps, *k, *baseline, &mut rng)?,
            Method::ZoLdsd(zo) => {
                let grad = oracle.gradient(&state.x);
                let mut r = zo_ldsd_step(&mut state, oracle, &cfg.steps, zo, &mut rng)?;
                r.grad = grad;
                r
            }
        };
        let grad = report.grad.as_deref();
        let grad_norm = grad.map(norm);
        let align_cos = match (grad, &report.g_x) {
            (Some(g), Some(gx)) => cosine(gx, g),
            _ => None,
        };
        let mc_alignment = match grad {
            Some(g) if cfg.telemetry_samples > 0 && norm(g) >= DEGENERATE_NORM => {
                Some(mc_expected_alignment(&policy_before, g, cfg.telemetry_samples, &mut telemetry_rng)?.mean)
            }
            _ => None,
        };
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        sink.record(&TraceRecord {
            run_id: run_id.to_string(),
            t: state.t - 1,
            oracle_calls: state.oracle_calls,
            loss,
            grad_norm,
            align_cos,
            mc_alignment,
            mu_norm,
            skipped: report.skipped,
            seed,
        })?;
    }
    Ok(RunOutcome { state, iterations })
}
