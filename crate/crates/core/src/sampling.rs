//! Gaussian direction policy `N(μ, ε²I)` and the alignment functional.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::vector::{check_dim, dot, norm, ParamVector};

/// Norms below this are treated as a zero direction.
pub const DEGENERATE_NORM: f64 = 1e-30;

/// Mean direction `μ` and per-coordinate standard deviation `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPolicy {
    mu: ParamVector,
    epsilon: f64,
}

impl SamplingPolicy {
    pub fn new(mu: ParamVector, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::NonPositive { name: "epsilon", value: epsilon });
        }
        Ok(Self { mu, epsilon })
    }

    pub fn mu(&self) -> &ParamVector {
        &self.mu
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn with_mu(&self, mu: ParamVector) -> Result<Self> {
        check_dim(self.dim(), mu.dim())?;
        Self::new(mu, self.epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.mu.clone(), epsilon)
    }

    /// `μ ← μ + step · g`
    pub fn ascend(&mut self, step: f64, g: &[f64]) -> Result<()> {
        check_dim(self.dim(), g.len())?;
        let next: Vec<f64> = self.mu.iter().zip(g).map(|(m, gi)| m + step * gi).collect();
        self.mu = ParamVector::new(next).map_err(|_| Error::NonFinite("policy mean"))?;
        Ok(())
    }

    /// Log-density of `v` under the policy.
    pub fn log_density(&self, v: &[f64]) -> f64 {
        let d = self.dim() as f64;
        let e2 = self.epsilon * self.epsilon;
        let sq: f64 = v.iter().zip(self.mu.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        -0.5 * d * (2.0 * std::f64::consts::PI * e2).ln() - sq / (2.0 * e2)
    }
}

/// A sampled direction `v` and, when it is not degenerate, `v/‖v‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    pub raw: ParamVector,
    pub unit: Option<ParamVector>,
}

impl Direction {
    pub fn new(raw: ParamVector) -> Self {
        let unit = normalize(&raw).ok();
        Self { raw, unit }
    }

    pub fn unit(&self) -> Result<&ParamVector> {
        self.unit.as_ref().ok_or(Error::DegenerateDirection { norm: self.raw.norm() })
    }

    pub fn is_degenerate(&self) -> bool {
        self.unit.is_none()
    }
}

/// Draws `k` directions `v = μ + ε z`, `z ∼ N(0, I)`.
pub fn sample_directions(policy: &SamplingPolicy, k: usize, rng: &mut Rng) -> Result<Vec<Direction>> {
    if k == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let eps = policy.epsilon();
    Ok((0..k)
        .map(|_| {
            let v: Vec<f64> = policy
                .mu()
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + eps * z
                })
                .collect();
            Direction::new(ParamVector::from_raw(v))
        })
        .collect())
}

pub fn normalize(v: &[f64]) -> Result<ParamVector> {
    let n = norm(v);
    if !(n >= DEGENERATE_NORM) || !n.is_finite() {
        return Err(Error::DegenerateDirection { norm: n });
    }
    Ok(ParamVector::from_raw(v.iter().map(|x| x / n).collect()))
}

/// Squared cosine between `v` and `g`: `⟨v̄, ḡ⟩²`.
pub fn alignment(v: &[f64], g: &[f64]) -> Result<f64> {
    check_dim(v.len(), g.len())?;
    let nv = norm(v);
    let ng = norm(g);
    if nv < DEGENERATE_NORM {
        return Err(Error::DegenerateDirection { norm: nv });
    }
    if ng < DEGENERATE_NORM {
        return Err(Error::DegenerateDirection { norm: ng });
    }
    let c = dot(v, g) / (nv * ng);
    Ok((c * c).min(1.0))
}

/// Score function of the Gaussian policy: `∇_μ log π_μ(v) = (v − μ)/ε²`.
pub fn log_density_grad(policy: &SamplingPolicy, v: &[f64]) -> Result<ParamVector> {
    check_dim(policy.dim(), v.len())?;
    let e2 = policy.epsilon() * policy.epsilon();
    Ok(ParamVector::from_raw(v.iter().zip(policy.mu().iter()).map(|(vi, mi)| (vi - mi) / e2).collect()))
}

/// How to pick the initial policy mean `μ⁰`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MuInit {
    /// Standard normal draw rescaled to unit norm.
    RandomUnit,
    /// Unit vector along `∇f(x⁰)`.
    Collinear,
    Zero,
}

pub fn init_mu(kind: MuInit, dim: usize, grad: Option<&[f64]>, rng: &mut Rng) -> Result<ParamVector> {
    match kind {
        MuInit::Zero => Ok(ParamVector::zeros(dim)),
        MuInit::Collinear => {
            let g = grad.ok_or(Error::MissingGradient)?;
            check_dim(dim, g.len())?;
            normalize(g)
        }
        MuInit::RandomUnit => loop {
            let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            if let Ok(u) = normalize(&z) {
                return Ok(u);
            }
        },
    }
}
