//! Numerical checks of the alignment theory.
//!
//! The central object is the expected alignment of the policy with a fixed
//! vector `g`,
//!
//! ```text
//! F_g(μ) = E_{v ∼ N(μ, ε²I)} ⟨v̄, ḡ⟩²,
//! ```
//!
//! estimated by Monte Carlo. Around it sit the landscape grid, the growth
//! dynamics of `F` under policy-gradient ascent, the Hessian bound of
//! `ψ_a(u) = ⟨a, u⟩² / ‖u‖²`, and the descent-inequality bookkeeping over a
//! recorded trace.
//!
//! Monte Carlo work is split into fixed-size chunks; chunk `c` draws from
//! [`substream`]`(seed, c)`, and partial sums are merged in chunk order, so
//! every estimate is a pure function of its seed whatever the thread count.

use rand::{Rng as _, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{reinforce_mu_grad, BaselineKind};
use crate::objective::Objective;
use crate::rng::{stream, substream, Rng, Stream};
use crate::sampling::{alignment, normalize, sample_directions, SamplingPolicy, DEGENERATE_NORM};
use crate::trace::TraceRecord;
use crate::vector::{axpy, check_dim, cosine, dot, norm, ParamVector};

const CHUNK: usize = 8192;

/// Smallest sample size accepted by the Monte Carlo estimators.
pub const MIN_SAMPLES: usize = 100;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl AlignmentEstimate {
    /// `|self − other|` in units of the combined standard error.
    pub fn z_score(&self, other: &AlignmentEstimate) -> f64 {
        let se = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        let diff = (self.mean - other.mean).abs();
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / se
        }
    }

    /// `|self − value| / stderr`.
    pub fn z_to(&self, value: f64) -> f64 {
        self.z_score(&AlignmentEstimate { mean: value, stderr: 0.0, n: 1 })
    }
}

/// Mean and standard error of `f(z)`, `z ∼ N(0, I_dim)`, over `n` draws.
pub fn mc_mean<F>(n: usize, dim: usize, seed: u64, f: F) -> AlignmentEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<(usize, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            let mut z = vec![0.0; dim];
            let (mut mean, mut m2) = (0.0, 0.0);
            for i in 0..len {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                let y = f(&z);
                let delta = y - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (y - mean);
            }
            (len, mean, m2)
        })
        .collect();

    // Chan et al. pairwise merge, in chunk order.
    let (mut count, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for (nb, mb, m2b) in partial {
        if nb == 0 {
            continue;
        }
        let total = count + nb;
        let delta = mb - mean;
        mean += delta * nb as f64 / total as f64;
        m2 += m2b + delta * delta * (count as f64) * (nb as f64) / total as f64;
        count = total;
    }
    let var = if count > 1 { m2 / (count - 1) as f64 } else { 0.0 };
    AlignmentEstimate { mean, stderr: (var / count.max(1) as f64).sqrt(), n: count }
}

/// `⟨v, ĝ⟩² / ‖v‖²` for a unit `ĝ`; zero at `v = 0` (a null event).
fn sq_cos(v: &[f64], g_unit: &[f64]) -> f64 {
    let nv2 = dot(v, v);
    if nv2 == 0.0 {
        return 0.0;
    }
    let c = dot(v, g_unit);
    (c * c / nv2).min(1.0)
}

fn check_mc(policy: &SamplingPolicy, g: &[f64], n: usize) -> Result<ParamVector> {
    check_dim(policy.dim(), g.len())?;
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: n });
    }
    normalize(g)
}

/// `F_g(μ)` by Monte Carlo with `n` draws; the seed for the draws is taken
/// from `rng`.
pub fn mc_expected_alignment(policy: &SamplingPolicy, g: &[f64], n: usize, rng: &mut Rng) -> Result<AlignmentEstimate> {
    let seed = rng.next_u64();
    mc_expected_alignment_seeded(policy, g, n, seed)
}

/// As [`mc_expected_alignment`] with an explicit seed. Two calls with the
/// same seed and dimension use the same standard-normal draws `z_i`, so
/// estimates at nearby `μ` are positively correlated (common random
/// numbers).
pub fn mc_expected_alignment_seeded(policy: &SamplingPolicy, g: &[f64], n: usize, seed: u64) -> Result<AlignmentEstimate> {
    let g_unit = check_mc(policy, g, n)?;
    let mu = policy.mu().as_slice();
    let eps = policy.epsilon();
    Ok(mc_mean(n, policy.dim(), seed, |z| {
        let v: Vec<f64> = mu.iter().zip(z).map(|(m, zi)| m + eps * zi).collect();
        sq_cos(&v, &g_unit)
    }))
}

/// Central finite difference of `F_g` along coordinate `coord` with step `h`,
/// using paired draws: each sample contributes
/// `(C(μ + h e_j + εz) − C(μ − h e_j + εz)) / 2h`, so the returned standard
/// error is that of the paired difference.
pub fn fd_alignment_partial(
    policy: &SamplingPolicy,
    g: &[f64],
    coord: usize,
    h: f64,
    n: usize,
    seed: u64,
) -> Result<AlignmentEstimate> {
    let g_unit = check_mc(policy, g, n)?;
    if coord >= policy.dim() {
        return Err(Error::OutOfRange { name: "coord", msg: format!("{coord} >= dim {}", policy.dim()) });
    }
    if !(h > 0.0) {
        return Err(Error::NonPositive { name: "h", value: h });
    }
    let mu = policy.mu().as_slice();
    let eps = policy.epsilon();
    Ok(mc_mean(n, policy.dim(), seed, |z| {
        let mut v: Vec<f64> = mu.iter().zip(z).map(|(m, zi)| m + eps * zi).collect();
        v[coord] += h;
        let plus = sq_cos(&v, &g_unit);
        v[coord] -= 2.0 * h;
        let minus = sq_cos(&v, &g_unit);
        (plus - minus) / (2.0 * h)
    }))
}

/// Full finite-difference gradient of `F_g`; all coordinates share `seed`.
pub fn fd_alignment_gradient(policy: &SamplingPolicy, g: &[f64], h: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    (0..policy.dim()).map(|j| fd_alignment_partial(policy, g, j, h, n, seed).map(|e| e.mean)).collect()
}

/// Rectangular grid of policy means in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub mu1: (f64, f64),
    pub mu2: (f64, f64),
    pub resolution: usize,
}

impl GridSpec {
    /// Square grid `[-r, r]²`, symmetric under `μ ↦ −μ`.
    pub fn symmetric(r: f64, resolution: usize) -> Self {
        Self { mu1: (-r, r), mu2: (-r, r), resolution }
    }

    fn coord(range: (f64, f64), i: usize, res: usize) -> f64 {
        range.0 + (range.1 - range.0) * i as f64 / (res - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandscapeCell {
    pub mu: [f64; 2],
    pub estimate: AlignmentEstimate,
}

/// `F_g` over a 2-D grid, row-major with `mu2` as the slow index.
///
/// Cells use independent draws (one seed per cell, taken from `rng` in
/// row-major order), so mirrored cells can be compared with the usual
/// combined standard error. Shared draws would make `F(μ)` and `F(−μ)`
/// antithetic and inflate their difference.
pub fn landscape_grid(
    g: &[f64],
    epsilon: f64,
    grid: &GridSpec,
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<Vec<LandscapeCell>>> {
    check_dim(2, g.len())?;
    if grid.resolution < 3 {
        return Err(Error::OutOfRange { name: "resolution", msg: format!("{} < 3", grid.resolution) });
    }
    if !(epsilon > 0.0) {
        return Err(Error::NonPositive { name: "epsilon", value: epsilon });
    }
    let res = grid.resolution;
    let seeds: Vec<u64> = (0..res * res).map(|_| rng.next_u64()).collect();
    (0..res)
        .map(|j| {
            (0..res)
                .map(|i| {
                    let seed = seeds[j * res + i];
                    let mu = [GridSpec::coord(grid.mu1, i, res), GridSpec::coord(grid.mu2, j, res)];
                    let policy = SamplingPolicy::new(ParamVector::new(mu.to_vec())?, epsilon)?;
                    let estimate = mc_expected_alignment_seeded(&policy, g, n, seed)?;
                    Ok(LandscapeCell { mu, estimate })
                })
                .collect()
        })
        .collect()
}

/// Two-sided tail mass of a standard normal beyond three standard deviations.
const THREE_SIGMA_TAIL: f64 = 0.002_699_796_063_260_2;

/// Mirror-symmetry test of a landscape grid, `F(μ) = F(−μ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryReport {
    /// Distinct mirrored pairs (the centre cell is excluded).
    pub pairs: usize,
    /// Pairs further apart than three combined standard errors.
    pub exceedances: usize,
    pub max_z: f64,
    /// Probability of at least `exceedances` such pairs if the grid were
    /// exactly symmetric.
    pub p_value: f64,
}

impl SymmetryReport {
    /// Symmetric unless the exceedance count is implausible at the 0.1%
    /// level. A lone pair beyond 3σ is expected on large grids.
    pub fn passes(&self) -> bool {
        self.p_value >= 1e-3
    }
}

/// `P(X ≥ k)` for `X ∼ Binomial(m, p)`.
fn binomial_upper_tail(m: usize, p: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut term = (1.0 - p).powi(m as i32);
    let mut below = 0.0;
    for i in 0..k.min(m + 1) {
        below += term;
        term *= (m - i) as f64 / (i + 1) as f64 * p / (1.0 - p);
    }
    (1.0 - below).max(0.0)
}

/// Compares each cell of a square grid with its point reflection.
pub fn symmetry_check(cells: &[Vec<LandscapeCell>]) -> SymmetryReport {
    let rows = cells.len();
    let flat: Vec<&LandscapeCell> = cells.iter().flatten().collect();
    let n = flat.len();
    let (mut pairs, mut exceedances, mut max_z) = (0, 0, 0.0f64);
    for i in 0..n / 2 {
        let z = flat[i].estimate.z_score(&flat[n - 1 - i].estimate);
        pairs += 1;
        max_z = max_z.max(z);
        if z > 3.0 {
            exceedances += 1;
        }
    }
    debug_assert!(rows == 0 || n % rows == 0);
    SymmetryReport { pairs, exceedances, max_z, p_value: binomial_upper_tail(pairs, THREE_SIGMA_TAIL, exceedances) }
}

/// `ψ_a(u) = ⟨a, u⟩² / ‖u‖²`.
pub fn psi_value(a: &[f64], u: &[f64]) -> f64 {
    let s = dot(a, u);
    s * s / dot(u, u)
}

/// `∇ψ_a(u) = 2⟨a,u⟩ a/‖u‖² − 2⟨a,u⟩² u/‖u‖⁴`.
pub fn psi_gradient(a: &[f64], u: &[f64]) -> Vec<f64> {
    let s = dot(a, u);
    let r = dot(u, u);
    a.iter().zip(u).map(|(ai, ui)| 2.0 * s * ai / r - 2.0 * s * s * ui / (r * r)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiProbe {
    pub a: ParamVector,
    pub u: ParamVector,
    pub hessian_norm: f64,
    /// `20 / ‖u‖²`
    pub bound: f64,
}

impl PsiProbe {
    pub fn ratio(&self) -> f64 {
        self.hessian_norm / self.bound
    }
}

/// Central-difference Hessian of `ψ_a` at `u` with step `h`.
pub fn psi_hessian_fd(a: &[f64], u: &[f64], h: f64) -> Vec<Vec<f64>> {
    let d = u.len();
    let mut w = u.to_vec();
    let mut eval = |i: usize, si: f64, j: usize, sj: f64| {
        w[i] += si * h;
        w[j] += sj * h;
        let v = psi_value(a, &w);
        w[i] -= si * h;
        w[j] -= sj * h;
        v
    };
    let mut hess = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let v = (eval(i, 1.0, j, 1.0) - eval(i, 1.0, j, -1.0) - eval(i, -1.0, j, 1.0) + eval(i, -1.0, j, -1.0))
                / (4.0 * h * h);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Spectral norm of a symmetric matrix by power iteration on `A²`.
pub fn spectral_norm_symmetric(a: &[Vec<f64>], max_iters: usize) -> f64 {
    let d = a.len();
    let matvec = |v: &[f64]| -> Vec<f64> { a.iter().map(|row| dot(row, v)).collect() };
    // Deterministic start with no special alignment to coordinate axes.
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.7).sin()).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda2 = 0.0;
    for _ in 0..max_iters.max(1) {
        let w = matvec(&matvec(&v));
        let next = dot(&w, &v);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        let converged = (next - lambda2).abs() <= 1e-14 * next.abs();
        lambda2 = next;
        if converged {
            break;
        }
    }
    lambda2.max(0.0).sqrt()
}

/// Numeric spectral norm of `∇²ψ_a(u)` next to the bound `20/‖u‖²`.
pub fn numeric_hessian_psi(a: &[f64], u: &[f64], h: f64) -> Result<PsiProbe> {
    check_dim(a.len(), u.len())?;
    let na = norm(a);
    if (na - 1.0).abs() > 1e-12 {
        return Err(Error::OutOfRange { name: "a", msg: format!("norm {na} is not 1") });
    }
    if !(h > 0.0) {
        return Err(Error::NonPositive { name: "h", value: h });
    }
    let nu = norm(u);
    if !(nu > 10.0 * h) {
        return Err(Error::OutOfRange { name: "u", msg: format!("norm {nu} too close to the origin for h = {h}") });
    }
    let hess = psi_hessian_fd(a, u, h);
    Ok(PsiProbe {
        a: ParamVector::new(a.to_vec())?,
        u: ParamVector::new(u.to_vec())?,
        hessian_norm: spectral_norm_symmetric(&hess, 5000),
        bound: 20.0 / (nu * nu),
    })
}

/// `cos(δ/(32d) + arccos(1−δ))² · (1 − e⁻¹)`: the level the expected
/// alignment never falls below under the theoretical schedules.
pub fn alignment_floor(delta: f64, dim: usize) -> f64 {
    let angle = delta / (32.0 * dim as f64) + (1.0 - delta).acos();
    angle.cos().powi(2) * (1.0 - (-1f64).exp())
}

/// Initial policy mean for [`dynamics_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuStart {
    /// `‖μ⁰‖ = norm` at angle `β⁰` from `g`; the orthogonal part is random.
    Angle { cos_beta: f64, norm: f64 },
    Collinear { norm: f64 },
    Zero,
}

/// Step sizes for the dynamics checker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DynamicsSchedule {
    /// `γ_μ^t = ‖μ^t‖²/640`, `ε = d^{−3/2} δ M / 960` with `M = ‖μ⁰‖`, and
    /// `γ_x = δ² / (3·2¹⁴·5²·L)` for the interleaved `x`-steps.
    Theoretical { delta: f64 },
    Constant { gamma_mu: f64, epsilon: f64, gamma_x: f64 },
}

impl DynamicsSchedule {
    pub fn theoretical_epsilon(delta: f64, dim: usize, m: f64) -> f64 {
        (dim as f64).powf(-1.5) * delta * m / 960.0
    }

    pub fn theoretical_gamma_mu(mu_norm: f64) -> f64 {
        mu_norm * mu_norm / 640.0
    }

    pub fn theoretical_gamma_x(delta: f64, smoothness: f64) -> f64 {
        delta * delta / (3.0 * 16384.0 * 25.0 * smoothness)
    }
}

/// How `∇_μ F` is obtained for the policy steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuGradMode {
    /// Paired central differences of the Monte Carlo `F` with
    /// `h = rel_step · max(‖μ‖, ε)`.
    FiniteDifference { rel_step: f64 },
    /// Score-function estimate from `k` samples.
    Reinforce { k: usize, baseline: BaselineKind },
}

/// Where the gradient `g^t` comes from.
pub enum GradientSource<'a> {
    Frozen(ParamVector),
    /// Interleave single-direction `x`-steps on `oracle` starting at `x0`.
    Oracle { oracle: &'a dyn Objective, x0: ParamVector },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    pub start: MuStart,
    pub schedule: DynamicsSchedule,
    pub mode: MuGradMode,
    pub horizon: usize,
    /// Samples per `E[C]` estimate and per finite-difference coordinate.
    pub n_per_estimate: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsPoint {
    pub t: usize,
    pub alignment: AlignmentEstimate,
    /// `None` while `μ = 0`.
    pub cos_beta: Option<f64>,
    pub mu_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsReport {
    /// `E[C]` before any step.
    pub initial: DynamicsPoint,
    /// One point after each policy step, `t = 1..=horizon`.
    pub series: Vec<DynamicsPoint>,
    /// Fraction of consecutive pairs (starting from `initial`) whose change
    /// is at least `−2` combined standard errors.
    pub monotone_fraction: f64,
    /// Guaranteed lower bound on `E[C]` under the theoretical schedule.
    pub floor_value: Option<f64>,
    pub min_mu_norm: f64,
    /// Whether `‖μ^t‖` stayed above half of `‖μ⁰‖` (the proxy used for `M`).
    pub mu_norm_held: bool,
}

impl DynamicsReport {
    pub fn terminal(&self) -> &DynamicsPoint {
        self.series.last().unwrap_or(&self.initial)
    }
}

fn start_mu(start: MuStart, g: &[f64], rng: &mut Rng) -> Result<ParamVector> {
    let d = g.len();
    let g_unit = normalize(g)?;
    match start {
        MuStart::Zero => Ok(ParamVector::zeros(d)),
        MuStart::Collinear { norm } => Ok(ParamVector::new(g_unit.iter().map(|x| norm * x).collect())?),
        MuStart::Angle { cos_beta, norm } => {
            if !(cos_beta > 0.0 && cos_beta < 1.0) {
                return Err(Error::OutOfRange { name: "cos_beta", msg: format!("{cos_beta} not in (0, 1)") });
            }
            let w = loop {
                let mut z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let proj = dot(&z, &g_unit);
                axpy(-proj, &g_unit, &mut z);
                if let Ok(w) = normalize(&z) {
                    break w;
                }
            };
            let sin_beta = (1.0 - cos_beta * cos_beta).sqrt();
            Ok(ParamVector::new(g_unit.iter().zip(w.iter()).map(|(gi, wi)| norm * (cos_beta * gi + sin_beta * wi)).collect())?)
        }
    }
}

/// Iterates policy-gradient ascent on `F` and records `E[C^t]`.
///
/// All `E[C]` estimates share one evaluation seed, so the series is smooth
/// in `μ` rather than jittering by independent noise between steps; the
/// standard errors are still those of a single estimate.
pub fn dynamics_check(source: GradientSource<'_>, cfg: &DynamicsConfig) -> Result<DynamicsReport> {
    if cfg.horizon == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let (mut x, oracle) = match source {
        GradientSource::Frozen(g) => (g, None),
        GradientSource::Oracle { oracle, x0 } => {
            check_dim(oracle.dim(), x0.dim())?;
            (x0, Some(oracle))
        }
    };
    let grad_at = |x: &ParamVector| -> Result<Vec<f64>> {
        match oracle {
            None => Ok(x.to_vec()),
            Some(o) => o.gradient(x).ok_or(Error::MissingGradient),
        }
    };

    let mut g = grad_at(&x)?;
    let d = g.len();
    let mut init_rng = stream(cfg.seed, Stream::PolicyInit);
    let mut dir_rng = stream(cfg.seed, Stream::Directions);
    let mut verify_rng = stream(cfg.seed, Stream::Verify);
    let eval_seed = verify_rng.next_u64();

    let mut mu = start_mu(cfg.start, &g, &mut init_rng)?;
    let m = mu.norm();

    let (epsilon, floor_value, gamma_x) = match cfg.schedule {
        DynamicsSchedule::Theoretical { delta } => {
            if !(delta > 0.0 && delta <= 0.5) {
                return Err(Error::OutOfRange { name: "delta", msg: format!("{delta} not in (0, 1/2]") });
            }
            if let MuStart::Angle { cos_beta, .. } = cfg.start {
                if cos_beta < delta || cos_beta > 1.0 - delta {
                    return Err(Error::OutOfRange {
                        name: "cos_beta",
                        msg: format!("{cos_beta} outside [{delta}, {}]", 1.0 - delta),
                    });
                }
            }
            let eps = DynamicsSchedule::theoretical_epsilon(delta, d, m);
            if !(eps > 0.0) {
                return Err(Error::OutOfRange {
                    name: "mu start",
                    msg: "theoretical epsilon needs a nonzero initial mean".into(),
                });
            }
            let gamma_x = match oracle {
                Some(o) => {
                    let l = o.smoothness_hint().ok_or(Error::OutOfRange {
                        name: "oracle",
                        msg: "theoretical x-steps need a smoothness constant".into(),
                    })?;
                    DynamicsSchedule::theoretical_gamma_x(delta, l)
                }
                None => 0.0,
            };
            (eps, Some(alignment_floor(delta, d)), gamma_x)
        }
        DynamicsSchedule::Constant { epsilon, gamma_x, .. } => (epsilon, None, gamma_x),
    };

    let estimate = |mu: &ParamVector, g: &[f64]| -> Result<DynamicsPoint> {
        let policy = SamplingPolicy::new(mu.clone(), epsilon)?;
        let alignment = mc_expected_alignment_seeded(&policy, g, cfg.n_per_estimate, eval_seed)?;
        Ok(DynamicsPoint { t: 0, alignment, cos_beta: cosine(mu, g), mu_norm: mu.norm() })
    };

    let initial = estimate(&mu, &g)?;
    let mut series = Vec::with_capacity(cfg.horizon);
    let mut min_mu_norm = m;
    for t in 1..=cfg.horizon {
        let policy = SamplingPolicy::new(mu.clone(), epsilon)?;
        let gamma_mu = match cfg.schedule {
            DynamicsSchedule::Theoretical { .. } => DynamicsSchedule::theoretical_gamma_mu(mu.norm()),
            DynamicsSchedule::Constant { gamma_mu, .. } => gamma_mu,
        };
        let g_mu = match cfg.mode {
            MuGradMode::FiniteDifference { rel_step } => {
                let h = rel_step * mu.norm().max(epsilon);
                let seed = dir_rng.next_u64();
                fd_alignment_gradient(&policy, &g, h, cfg.n_per_estimate, seed)?
            }
            MuGradMode::Reinforce { k, baseline } => {
                let dirs = sample_directions(&policy, k, &mut dir_rng)?;
                let rewards = dirs.iter().map(|v| alignment(&v.raw, &g)).collect::<Result<Vec<_>>>()?;
                reinforce_mu_grad(&policy, &dirs, &rewards, baseline)?.g_mu.into_inner()
            }
        };

        // x-step with a single direction drawn from the pre-update policy.
        if oracle.is_some() && gamma_x > 0.0 && norm(&g) >= DEGENERATE_NORM {
            let v = sample_directions(&policy, 1, &mut dir_rng)?.remove(0);
            if let Ok(u) = v.unit() {
                let mut next = x.to_vec();
                axpy(-gamma_x * dot(u, &g), u, &mut next);
                x = ParamVector::new(next).map_err(|_| Error::NonFinite("iterate"))?;
            }
        }

        let mut next_mu = mu.to_vec();
        axpy(gamma_mu, &g_mu, &mut next_mu);
        mu = ParamVector::new(next_mu).map_err(|_| Error::NonFinite("policy mean"))?;
        min_mu_norm = min_mu_norm.min(mu.norm());
        g = grad_at(&x)?;
        let mut point = estimate(&mu, &g)?;
        point.t = t;
        series.push(point);
    }

    let mut prev = &initial;
    let mut ok = 0usize;
    for p in &series {
        let se = (prev.alignment.stderr.powi(2) + p.alignment.stderr.powi(2)).sqrt();
        if p.alignment.mean - prev.alignment.mean >= -2.0 * se {
            ok += 1;
        }
        prev = p;
    }
    Ok(DynamicsReport {
        initial,
        monotone_fraction: ok as f64 / series.len() as f64,
        series,
        floor_value,
        min_mu_norm,
        mu_norm_held: min_mu_norm >= 0.5 * m,
    })
}

/// Both sides of the descent inequality over one recorded run:
/// `(1/T) Σ (γ_x/2) E[C^t] ‖∇f(x^t)‖² ≤ (f(x⁰) − f*)/T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentAccounting {
    pub lhs: f64,
    pub rhs: f64,
    pub iterations: usize,
}

impl DescentAccounting {
    pub fn violation(&self) -> f64 {
        (self.lhs - self.rhs).max(0.0)
    }
}

/// Reads `E[C^t]` from the `mc_alignment` column; records without it (or
/// without a gradient norm) are an error.
pub fn descent_accounting(trace: &[TraceRecord], gamma_x: f64, f_star: f64) -> Result<DescentAccounting> {
    let first = trace.first().ok_or(Error::TooFewSamples { needed: 1, got: 0 })?;
    let mut sum = 0.0;
    for rec in trace {
        let c = rec.mc_alignment.ok_or(Error::OutOfRange {
            name: "trace",
            msg: format!("record {} has no mc_alignment", rec.t),
        })?;
        let gn = rec.grad_norm.ok_or(Error::MissingGradient)?;
        sum += 0.5 * gamma_x * c * gn * gn;
    }
    let t = trace.len() as f64;
    Ok(DescentAccounting { lhs: sum / t, rhs: (first.loss - f_star) / t, iterations: trace.len() })
}
