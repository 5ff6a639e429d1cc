//! Property suites behind `zoldsd verify`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::alignlab::{
    dynamics_check, fd_alignment_partial, mc_expected_alignment, numeric_hessian_psi, symmetry_check, DynamicsConfig,
    DynamicsSchedule, GradientSource, MuGradMode, MuStart,
};
use crate::error::{Error, Result};
use crate::estimators::{reinforce_mu_grad, BaselineKind};
use crate::rng::{stream, Rng, Stream};
use crate::sampling::{alignment, normalize, sample_directions, SamplingPolicy};
use crate::vector::{norm, ParamVector};

use super::{cmd_landscape, LandscapeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    AlignmentOneOverD,
    HessianBound,
    Landscape,
    Dynamics,
    Unbiasedness,
}

impl Suite {
    pub const ALL: [Suite; 5] =
        [Suite::AlignmentOneOverD, Suite::HessianBound, Suite::Landscape, Suite::Dynamics, Suite::Unbiasedness];

    pub fn name(self) -> &'static str {
        match self {
            Suite::AlignmentOneOverD => "alignment_1_over_d",
            Suite::HessianBound => "hessian_bound",
            Suite::Landscape => "landscape",
            Suite::Dynamics => "dynamics",
            Suite::Unbiasedness => "unbiasedness",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::OutOfRange {
            name: "suite",
            msg: format!("unknown suite {s:?}; expected one of {}", Suite::ALL.map(Suite::name).join(", ")),
        })
    }
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {:.6e} (threshold {:.6e}){}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.threshold,
            if self.detail.is_empty() { String::new() } else { format!("  {}", self.detail) }
        )
    }
}

fn at_most(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Check {
    Check { name: name.into(), value, threshold, pass: value <= threshold, detail: detail.into() }
}

fn at_least(name: impl Into<String>, value: f64, threshold: f64, detail: impl Into<String>) -> Check {
    Check { name: name.into(), value, threshold, pass: value >= threshold, detail: detail.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {}", self.suite.name())?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        write!(f, "{}", if self.all_pass() { "all checks passed" } else { "some checks FAILED" })
    }
}

fn random_unit(d: usize, rng: &mut Rng) -> ParamVector {
    loop {
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = normalize(&z) {
            return u;
        }
    }
}

/// `E[C] = 1/d` under `N(0, I)` for each `d`, within three standard errors.
pub fn alignment_one_over_d(dims: &[usize], n: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = stream(seed, Stream::Verify);
    dims.iter()
        .map(|&d| {
            let g = random_unit(d, &mut rng);
            let policy = SamplingPolicy::new(ParamVector::zeros(d), 1.0)?;
            let est = mc_expected_alignment(&policy, &g, n, &mut rng)?;
            let z = est.z_to(1.0 / d as f64);
            Ok(at_most(
                format!("d={d} z-score"),
                z,
                3.0,
                format!("|mean*d - 1| = {:.3e}, mean = {:.6}, stderr = {:.2e}", (est.mean * d as f64 - 1.0).abs(), est.mean, est.stderr),
            ))
        })
        .collect()
}

/// Largest `‖∇²ψ_a(u)‖ / (20/‖u‖²)` over `probes` random points per
/// dimension list entry (cycled), with `‖u‖` log-uniform in `[0.1, 10]`.
pub fn hessian_bound(dims: &[usize], probes: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = stream(seed, Stream::Verify);
    let mut worst = vec![0.0f64; dims.len()];
    for i in 0..probes {
        let slot = i % dims.len();
        let d = dims[slot];
        let a = random_unit(d, &mut rng);
        let r = 10f64.powf(rng.random_range(-1.0..1.0));
        let dir = random_unit(d, &mut rng);
        let u: Vec<f64> = dir.iter().map(|x| r * x).collect();
        let probe = numeric_hessian_psi(&a, &u, 1e-4 * norm(&u))?;
        worst[slot] = worst[slot].max(probe.ratio());
    }
    Ok(dims
        .iter()
        .zip(&worst)
        .map(|(d, w)| at_most(format!("d={d} max hessian_norm/bound"), *w, 1.0 + 1e-3, ""))
        .collect())
}

/// Emits the landscape grid and tests its point symmetry.
pub fn landscape(opts: &LandscapeOptions, out_dir: &Path) -> Result<Vec<Check>> {
    let (path, cells) = cmd_landscape(opts, out_dir)?;
    let sym = symmetry_check(&cells);
    let res = cells.len();
    let mid = res / 2;
    let aligned = cells[mid][res - 1].estimate.mean;
    let orthogonal = cells[res - 1][mid].estimate.mean;
    Ok(vec![
        at_least(
            "mirror symmetry p-value",
            sym.p_value,
            1e-3,
            format!(
                "{} of {} mirrored pairs beyond 3 stderr, max z {:.2}; grid at {}",
                sym.exceedances,
                sym.pairs,
                sym.max_z,
                path.display()
            ),
        ),
        at_least("aligned minus orthogonal", aligned - orthogonal, 0.5, format!("F along g {aligned:.4}, across g {orthogonal:.4}")),
    ])
}

/// `δ` implied by the initial angle: the largest `δ < 1/2` with
/// `δ ≤ cos β⁰ ≤ 1 − δ`.
pub fn band_delta(cos_beta0: f64) -> f64 {
    cos_beta0.min(1.0 - cos_beta0).min(0.5 - 1e-3)
}

/// Growth under the theoretical schedules plus the two critical points.
pub fn dynamics(dim: usize, horizon: usize, n: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = stream(seed, Stream::Verify);
    let g = random_unit(dim, &mut rng);
    let cos_beta = 0.5;
    let delta = band_delta(cos_beta);
    let grow = dynamics_check(
        GradientSource::Frozen(g.clone()),
        &DynamicsConfig {
            start: MuStart::Angle { cos_beta, norm: 1.0 },
            schedule: DynamicsSchedule::Theoretical { delta },
            mode: MuGradMode::FiniteDifference { rel_step: 1e-4 },
            horizon,
            n_per_estimate: n,
            seed,
        },
    )?;
    let term = grow.terminal().alignment;
    let floor = grow.floor_value.unwrap_or(f64::NAN);
    let mut checks = vec![
        at_least("growth monotone fraction", grow.monotone_fraction, 0.95, format!("delta = {delta}")),
        at_least(
            "terminal E[C] minus floor",
            term.mean - floor,
            -3.0 * term.stderr,
            format!("E[C] {:.5} -> {:.5}, floor {:.5}", grow.initial.alignment.mean, term.mean, floor),
        ),
        at_least("min |mu| / |mu0|", grow.min_mu_norm / grow.initial.mu_norm, 0.5, ""),
    ];

    let saddle = dynamics_check(
        GradientSource::Frozen(g.clone()),
        &DynamicsConfig {
            start: MuStart::Zero,
            schedule: DynamicsSchedule::Constant { gamma_mu: 1e-3, epsilon: 1.0, gamma_x: 0.0 },
            mode: MuGradMode::FiniteDifference { rel_step: 1e-4 },
            horizon,
            n_per_estimate: n,
            seed,
        },
    )?;
    let worst = std::iter::once(&saddle.initial)
        .chain(&saddle.series)
        .map(|p| p.alignment.z_to(1.0 / dim as f64))
        .fold(0.0f64, f64::max);
    checks.push(at_most("saddle max z-score from 1/d", worst, 3.0, ""));

    let collinear = dynamics_check(
        GradientSource::Frozen(g),
        &DynamicsConfig {
            start: MuStart::Collinear { norm: 1.0 },
            schedule: DynamicsSchedule::Constant { gamma_mu: 1e-3, epsilon: 1e-3, gamma_x: 0.0 },
            mode: MuGradMode::FiniteDifference { rel_step: 1e-4 },
            horizon,
            n_per_estimate: n,
            seed,
        },
    )?;
    let worst = collinear.series.iter().map(|p| p.alignment.z_score(&collinear.initial.alignment)).fold(0.0f64, f64::max);
    checks.push(at_most("collinear max z-score from start", worst, 3.0, ""));
    Ok(checks)
}

/// Score-function estimators against the paired finite-difference gradient
/// of `F`. The leave-one-out estimator is unbiased; the mean baseline is
/// shrunk by `(K−1)/K`, which is checked as such, and its raw ratio is
/// reported.
pub fn unbiasedness(dim: usize, k: usize, estimates: usize, fd_samples: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = stream(seed, Stream::Verify);
    let g = random_unit(dim, &mut rng);
    let policy = SamplingPolicy::new(random_unit(dim, &mut rng), 0.3)?;
    let coords: Vec<usize> = rand::seq::index::sample(&mut rng, dim, 3.min(dim)).into_vec();
    let fd_seed: u64 = rng.random();

    let (mean_est, loo_est) = score_estimates(&policy, &g, k, estimates, &mut rng)?;
    let shrink = (k as f64 - 1.0) / k as f64;
    let mut checks = Vec::new();
    for &j in &coords {
        let fd = fd_alignment_partial(&policy, &g, j, 1e-3, fd_samples, fd_seed)?;
        let (m, m_se) = mean_est[j];
        let (l, l_se) = loo_est[j];
        let z_loo = (l - fd.mean).abs() / (l_se.powi(2) + fd.stderr.powi(2)).sqrt();
        let z_mean = (m - shrink * fd.mean).abs() / (m_se.powi(2) + (shrink * fd.stderr).powi(2)).sqrt();
        checks.push(at_most(
            format!("coord {j} leave-one-out z"),
            z_loo,
            5.0,
            format!("estimate {l:.5}, finite difference {:.5}", fd.mean),
        ));
        checks.push(at_most(
            format!("coord {j} mean-baseline z vs (K-1)/K"),
            z_mean,
            5.0,
            format!("estimate/finite difference = {:.4} (expected {shrink:.4})", m / fd.mean),
        ));
    }
    Ok(checks)
}

/// Per-coordinate `(mean, stderr)` of `count` mean-baseline and
/// leave-one-out estimates, each built from `k` fresh samples.
pub fn score_estimates(
    policy: &SamplingPolicy,
    g: &[f64],
    k: usize,
    count: usize,
    rng: &mut Rng,
) -> Result<(Vec<(f64, f64)>, Vec<(f64, f64)>)> {
    let d = policy.dim();
    let mut acc = [vec![(0.0, 0.0); d], vec![(0.0, 0.0); d]];
    for _ in 0..count {
        let dirs = sample_directions(policy, k, rng)?;
        let rewards = dirs.iter().map(|v| alignment(&v.raw, g)).collect::<Result<Vec<_>>>()?;
        for (slot, kind) in [BaselineKind::Mean, BaselineKind::LeaveOneOut].into_iter().enumerate() {
            let est = reinforce_mu_grad(policy, &dirs, &rewards, kind)?;
            for (a, x) in acc[slot].iter_mut().zip(est.g_mu.iter()) {
                a.0 += x;
                a.1 += x * x;
            }
        }
    }
    let n = count as f64;
    let finish = |v: &Vec<(f64, f64)>| -> Vec<(f64, f64)> {
        v.iter()
            .map(|(s, s2)| {
                let mean = s / n;
                let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
                (mean, (var / n).sqrt())
            })
            .collect()
    };
    Ok((finish(&acc[0]), finish(&acc[1])))
}

/// Runs `suite` at its documented scale.
pub fn cmd_verify(suite: Suite, out_dir: &Path, seed: u64) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::AlignmentOneOverD => alignment_one_over_d(&[4, 16, 64, 256], 100_000, seed)?,
        Suite::HessianBound => hessian_bound(&[2, 8, 32], 1000, seed)?,
        Suite::Landscape => landscape(&LandscapeOptions { seed, ..LandscapeOptions::default() }, out_dir)?,
        Suite::Dynamics => dynamics(16, 50, 10_000, seed)?,
        Suite::Unbiasedness => unbiasedness(8, 5, 100_000, 1_000_000, seed)?,
    };
    Ok(VerifyReport { suite, checks })
}
