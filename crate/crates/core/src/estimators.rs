//! Gradient surrogates.
//!
//! * [`two_point`]: central-difference directional derivative, 2 oracle calls.
//! * [`dgd_estimate`]: K-sample projection average using exact directional
//!   derivatives.
//! * [`reinforce_mu_grad_mean`] / [`reinforce_mu_grad_loo`]: score-function
//!   estimates of the gradient of the expected reward with respect to the
//!   policy mean.
//! * [`select_best_direction`] + [`zo_gradient`]: greedy forward-only step
//!   that spends `K + 1` oracle calls in total.

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::sampling::{log_density_grad, Direction, SamplingPolicy};
use crate::vector::{add_scaled, axpy, check_dim, dot, ParamVector};

fn probe(oracle: &dyn Objective, x: &[f64], tau: f64, v: &[f64]) -> Result<f64> {
    let y = oracle.value(&add_scaled(x, tau, v));
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::NonFinite("probe value"))
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive { name: "tau", value: tau })
    }
}

/// `(f(x + τv) − f(x − τv)) / 2τ`
pub fn two_point(oracle: &dyn Objective, x: &[f64], v: &[f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    check_dim(x.len(), v.len())?;
    let plus = probe(oracle, x, tau, v)?;
    let minus = probe(oracle, x, -tau, v)?;
    Ok((plus - minus) / (2.0 * tau))
}

/// `(1/K) Σ v̄_k ⟨v̄_k, ∇f⟩`
pub fn dgd_estimate(grad: &[f64], directions: &[Direction]) -> Result<ParamVector> {
    if directions.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let k = directions.len() as f64;
    let mut out = vec![0.0; grad.len()];
    for d in directions {
        let u = d.unit()?;
        check_dim(grad.len(), u.dim())?;
        axpy(dot(u, grad) / k, u, &mut out);
    }
    Ok(ParamVector::from_raw(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    /// `b = (1/K) Σ r_k`, shared by all samples.
    Mean,
    /// `b_i = (1/(K−1)) Σ_{j≠i} r_j`.
    LeaveOneOut,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MuGradEstimate {
    pub g_mu: ParamVector,
    pub baseline: BaselineKind,
    pub advantages: Vec<f64>,
}

/// Sign applied to raw probe values before they act as rewards.
///
/// `Negative` (the default) rewards low objective values, so ascending the
/// estimate moves `μ` toward descent directions. `Positive` uses the raw
/// probe values as written in the forward-only algorithm listing, which
/// moves `μ` toward directions that *increase* `f`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RewardSign {
    #[default]
    Negative,
    Positive,
}

impl RewardSign {
    pub fn factor(self) -> f64 {
        match self {
            RewardSign::Negative => -1.0,
            RewardSign::Positive => 1.0,
        }
    }
}

pub fn mean_advantages(rewards: &[f64]) -> Vec<f64> {
    let b = rewards.iter().sum::<f64>() / rewards.len() as f64;
    rewards.iter().map(|r| r - b).collect()
}

/// `(K r_i − Σ_j r_j)/(K − 1)`, i.e. `r_i` minus the mean of the others.
pub fn loo_advantages(rewards: &[f64]) -> Vec<f64> {
    let k = rewards.len() as f64;
    let total: f64 = rewards.iter().sum();
    rewards.iter().map(|r| (k * r - total) / (k - 1.0)).collect()
}

/// `(1/K) Σ a_k (v_k − μ)/ε²` for the given per-sample advantages.
fn score_average(policy: &SamplingPolicy, directions: &[Direction], advantages: &[f64]) -> Result<ParamVector> {
    let k = directions.len() as f64;
    let mut g = vec![0.0; policy.dim()];
    for (d, a) in directions.iter().zip(advantages) {
        let score = log_density_grad(policy, &d.raw)?;
        axpy(a / k, &score, &mut g);
    }
    ParamVector::new(g).map_err(|_| Error::NonFinite("mu gradient"))
}

/// Score-function estimate of `∇_μ E[r]` with the given baseline.
pub fn reinforce_mu_grad(
    policy: &SamplingPolicy,
    directions: &[Direction],
    rewards: &[f64],
    baseline: BaselineKind,
) -> Result<MuGradEstimate> {
    if directions.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: directions.len() });
    }
    check_dim(directions.len(), rewards.len())?;
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("reward"));
    }
    let advantages = match baseline {
        BaselineKind::Mean => mean_advantages(rewards),
        BaselineKind::LeaveOneOut => loo_advantages(rewards),
    };
    let g_mu = score_average(policy, directions, &advantages)?;
    Ok(MuGradEstimate { g_mu, baseline, advantages })
}

/// Mean-baseline estimator `(1/K) Σ (r_k − b)(v_k − μ)/ε²`, `b = mean(r)`.
///
/// Because `b` includes the sample's own reward, the expectation of this
/// estimator is `(K−1)/K · ∇_μ E[r]`, not `∇_μ E[r]` itself.
pub fn reinforce_mu_grad_mean(policy: &SamplingPolicy, directions: &[Direction], rewards: &[f64]) -> Result<MuGradEstimate> {
    reinforce_mu_grad(policy, directions, rewards, BaselineKind::Mean)
}

/// The forward-only policy step: leave-one-out advantages over the cached
/// probe values, signed by `sign`. Costs no oracle calls.
pub fn reinforce_mu_grad_loo(policy: &SamplingPolicy, probes: &ProbeSet, sign: RewardSign) -> Result<MuGradEstimate> {
    let s = sign.factor();
    let rewards: Vec<f64> = probes.forward_values.iter().map(|f| s * f).collect();
    reinforce_mu_grad(policy, &probes.directions, &rewards, BaselineKind::LeaveOneOut)
}

/// Directions together with their forward probes `f(x + τ v_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub directions: Vec<Direction>,
    pub forward_values: Vec<f64>,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub probes: ProbeSet,
}

impl Selection {
    pub fn direction(&self) -> &Direction {
        &self.probes.directions[self.index]
    }

    pub fn forward_value(&self) -> f64 {
        self.probes.forward_values[self.index]
    }
}

/// Evaluates `f(x + τ v_i)` for every direction (exactly `K` calls) and picks
/// the smallest; ties go to the lowest index.
pub fn select_best_direction(oracle: &dyn Objective, x: &[f64], directions: Vec<Direction>, tau: f64) -> Result<Selection> {
    check_tau(tau)?;
    if directions.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut forward_values = Vec::with_capacity(directions.len());
    for d in &directions {
        check_dim(x.len(), d.raw.dim())?;
        forward_values.push(probe(oracle, x, tau, &d.raw)?);
    }
    let mut index = 0;
    for (i, &v) in forward_values.iter().enumerate().skip(1) {
        if v < forward_values[index] {
            index = i;
        }
    }
    Ok(Selection { index, probes: ProbeSet { directions, forward_values, tau } })
}

/// `(f(x + τv*) − f(x − τv*))/(2τ) · v*`.
///
/// Pass the cached forward probe to spend a single oracle call. With
/// `normalize`, the result is `⟨v̄*, ∇f⟩`-style: the difference quotient
/// along `v̄*` times `v̄*`, still reusing the probe along the raw `v*`.
pub fn zo_gradient(
    oracle: &dyn Objective,
    x: &[f64],
    v_star: &Direction,
    tau: f64,
    forward: Option<f64>,
    normalize: bool,
) -> Result<ParamVector> {
    check_tau(tau)?;
    check_dim(x.len(), v_star.raw.dim())?;
    let plus = match forward {
        Some(f) if f.is_finite() => f,
        Some(_) => return Err(Error::NonFinite("probe value")),
        None => probe(oracle, x, tau, &v_star.raw)?,
    };
    let minus = probe(oracle, x, -tau, &v_star.raw)?;
    let slope = (plus - minus) / (2.0 * tau);
    let g = if normalize {
        let n = v_star.raw.norm();
        let u = v_star.unit()?;
        crate::vector::scaled(slope / n, u)
    } else {
        crate::vector::scaled(slope, &v_star.raw)
    };
    ParamVector::new(g).map_err(|_| Error::NonFinite("zo gradient"))
}
