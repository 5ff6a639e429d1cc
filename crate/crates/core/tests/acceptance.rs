//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every line is printed even
//! when all criteria pass. The process exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use zoldsd::alignlab::{
    descent_accounting, dynamics_check, fd_alignment_partial, mc_expected_alignment, numeric_hessian_psi,
    DynamicsConfig, DynamicsSchedule, GradientSource, MuGradMode, MuStart,
};
use zoldsd::bench::config::{load_config, parse_config};
use zoldsd::bench::verify::{band_delta, score_estimates};
use zoldsd::bench::{cmd_compare, execute};
use zoldsd::estimators::{two_point, BaselineKind};
use zoldsd::objective::{least_squares_objective, read_libsvm_file, FnObjective, Objective};
use zoldsd::optimizers::{run, Method, OptimizerConfig, StepSizes, Stop};
use zoldsd::rng::{stream, Rng, Stream};
use zoldsd::sampling::{normalize, MuInit, SamplingPolicy};
use zoldsd::trace::TraceRecord;
use zoldsd::vector::{norm, ParamVector};
use zoldsd::Error;

const SEED: u64 = 20_240_601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn gaussian(d: usize, rng: &mut Rng) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_unit(d: usize, rng: &mut Rng) -> ParamVector {
    loop {
        if let Ok(u) = normalize(&gaussian(d, rng)) {
            return u;
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Isotropic sampling: `E[C] = 1/d`.
fn c1_isotropic_alignment() -> Outcome {
    let mut rng = stream(SEED, Stream::Verify);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for d in [4usize, 16, 64, 256] {
        let g = gaussian(d, &mut rng);
        let policy = SamplingPolicy::new(ParamVector::zeros(d), 1.0).unwrap();
        let est = mc_expected_alignment(&policy, &g, 100_000, &mut rng).unwrap();
        let z = est.z_to(1.0 / d as f64);
        worst = worst.max(z);
        parts.push(format!("d={d} z={z:.2}"));
    }
    outcome(worst <= 3.0, format!("{} (limit 3)", parts.join(", ")))
}

/// Central two-point differences are exact on quadratics up to rounding.
fn c2_two_point_exactness() -> Outcome {
    let mut rng = stream(SEED, Stream::Data);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let d = rng.random_range(1..=12);
        // f(x) = ½ xᵀAᵀAx + bᵀx + c, with A dense so the Hessian is not diagonal.
        let a: Vec<Vec<f64>> = (0..d).map(|_| gaussian(d, &mut rng)).collect();
        let b = gaussian(d, &mut rng);
        let c: f64 = rng.sample(StandardNormal);
        let (a2, b2) = (a.clone(), b.clone());
        let f = FnObjective::new(d, move |x: &[f64]| {
            let ax: Vec<f64> = a.iter().map(|row| row.iter().zip(x).map(|(r, xi)| r * xi).sum()).collect();
            0.5 * ax.iter().map(|v| v * v).sum::<f64>() + b.iter().zip(x).map(|(bi, xi)| bi * xi).sum::<f64>() + c
        });
        let x = gaussian(d, &mut rng);
        let v = gaussian(d, &mut rng);
        let tau = 10f64.powf(rng.random_range(-3.0..0.0));
        let ax: Vec<f64> = a2.iter().map(|row| row.iter().zip(&x).map(|(r, xi)| r * xi).sum()).collect();
        let grad: Vec<f64> = (0..d).map(|j| a2.iter().zip(&ax).map(|(row, s)| row[j] * s).sum::<f64>() + b2[j]).collect();
        let truth: f64 = grad.iter().zip(&v).map(|(g, vi)| g * vi).sum();
        let est = two_point(&f, &x, &v, tau).unwrap();
        let rel = (est - truth).abs() / truth.abs();
        if rel > worst {
            worst = rel;
        }
        if !rel.is_finite() {
            return outcome(false, format!("case {case}: directional derivative {truth:e}"));
        }
    }
    outcome(worst <= 1e-10, format!("max relative error {worst:.2e} over 100 cases (limit 1e-10)"))
}

/// The mean-baseline score estimate against the finite-difference gradient
/// of the Monte Carlo objective, as stated: no correction factor.
fn c3_reinforce_unbiasedness() -> Outcome {
    let (d, k) = (8, 5);
    let mut rng = stream(SEED, Stream::Verify);
    let g = random_unit(d, &mut rng);
    let policy = SamplingPolicy::new(random_unit(d, &mut rng), 0.3).unwrap();
    let coords = rand::seq::index::sample(&mut rng, d, 3).into_vec();
    let fd_seed: u64 = rng.random();
    let (mean_est, loo_est) = score_estimates(&policy, &g, k, 100_000, &mut rng).unwrap();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for j in coords {
        let fd = fd_alignment_partial(&policy, &g, j, 1e-3, 1_000_000, fd_seed).unwrap();
        let (m, se) = mean_est[j];
        let z = (m - fd.mean).abs() / (se * se + fd.stderr * fd.stderr).sqrt();
        worst = worst.max(z);
        let (l, l_se) = loo_est[j];
        let z_loo = (l - fd.mean).abs() / (l_se * l_se + fd.stderr * fd.stderr).sqrt();
        parts.push(format!("coord {j}: z={z:.1} ratio={:.3} (leave-one-out z={z_loo:.1})", m / fd.mean));
    }
    outcome(worst <= 5.0, format!("{} (limit 5)", parts.join("; ")))
}

fn c4_hessian_bound() -> Outcome {
    let mut rng = stream(SEED, Stream::Verify);
    let dims = [2usize, 8, 32];
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let d = dims[i % dims.len()];
        let a = random_unit(d, &mut rng);
        let r = 10f64.powf(rng.random_range(-1.0..1.0));
        let u: Vec<f64> = random_unit(d, &mut rng).iter().map(|x| r * x).collect();
        let probe = numeric_hessian_psi(&a, &u, 1e-4 * r).unwrap();
        worst = worst.max(probe.ratio());
    }
    outcome(worst <= 1.0 + 1e-3, format!("max norm/bound {worst:.4} over 1000 probes (limit 1.001)"))
}

fn c5_alignment_dynamics() -> Outcome {
    let d = 16;
    let mut rng = stream(SEED, Stream::Verify);
    let g = random_unit(d, &mut rng);
    let cos_beta = 0.5;
    let base = DynamicsConfig {
        start: MuStart::Angle { cos_beta, norm: 1.0 },
        schedule: DynamicsSchedule::Theoretical { delta: band_delta(cos_beta) },
        mode: MuGradMode::FiniteDifference { rel_step: 1e-4 },
        horizon: 50,
        n_per_estimate: 10_000,
        seed: SEED,
    };
    let grow = dynamics_check(GradientSource::Frozen(g.clone()), &base).unwrap();
    let term = grow.terminal().alignment;
    let floor = grow.floor_value.unwrap();
    let floor_ok = term.mean >= floor - 3.0 * term.stderr;

    // At μ = 0 the score gradient vanishes in expectation, so any fixed
    // schedule leaves E[C] at 1/d.
    let saddle = dynamics_check(
        GradientSource::Frozen(g),
        &DynamicsConfig {
            start: MuStart::Zero,
            schedule: DynamicsSchedule::Constant { gamma_mu: 1e-3, epsilon: 1.0, gamma_x: 0.0 },
            ..base
        },
    )
    .unwrap();
    let saddle_z = std::iter::once(&saddle.initial)
        .chain(&saddle.series)
        .map(|p| p.alignment.z_to(1.0 / d as f64))
        .fold(0.0f64, f64::max);

    let pass = grow.monotone_fraction >= 0.95 && floor_ok && saddle_z <= 3.0;
    outcome(
        pass,
        format!(
            "monotone {:.2} (>=0.95), E[C] {:.4} -> {:.4} vs floor {floor:.4} (stderr {:.1e}), saddle max z {saddle_z:.2} (<=3)",
            grow.monotone_fraction, grow.initial.alignment.mean, term.mean, term.stderr
        ),
    )
}

/// Toy experiment on the bundled least-squares fixture.
fn c6_toy_experiment() -> Outcome {
    let data = read_libsvm_file(manifest_dir().join("fixtures/a9a_synthetic.libsvm")).unwrap();
    let f = least_squares_objective(data).unwrap();
    let d = f.dim();
    let budget = 5 * 10_000;
    let ldsd = OptimizerConfig {
        method: Method::Ldsd { k: 5, baseline: BaselineKind::Mean },
        steps: StepSizes::constant(5.0, 1.4e-5),
        epsilon: 1.2e-2,
        mu_init: MuInit::Zero,
        mu_scale: 1.0,
        telemetry_samples: 0,
    };
    let baseline = OptimizerConfig {
        steps: StepSizes::constant(200.0, 0.0),
        epsilon: 1.0,
        ..ldsd
    };
    let one = |cfg: &OptimizerConfig, seed: u64| -> (f64, f64) {
        let mut trace: Vec<TraceRecord> = Vec::new();
        let out = run(cfg, &f, ParamVector::zeros(d), Stop::Budget(budget), seed, "toy", &mut trace).unwrap();
        let tail = &trace[trace.len() - trace.len() / 3..];
        let cos: Vec<f64> = tail.iter().filter_map(|r| r.align_cos).collect();
        (median(&cos), norm(&f.gradient(&out.state.x).unwrap()))
    };
    let seeds: Vec<u64> = (0..10).map(|s| SEED + s).collect();
    let results: Vec<((f64, f64), (f64, f64))> = seeds.par_iter().map(|&s| (one(&ldsd, s), one(&baseline, s))).collect();
    let l_cos = median(&results.iter().map(|r| r.0 .0).collect::<Vec<_>>());
    let l_grad = median(&results.iter().map(|r| r.0 .1).collect::<Vec<_>>());
    let b_cos = median(&results.iter().map(|r| r.1 .0).collect::<Vec<_>>());
    let b_grad = median(&results.iter().map(|r| r.1 .1).collect::<Vec<_>>());
    let limit = 3.0 / (d as f64).sqrt();
    let pass = l_cos >= 0.5 && b_cos <= limit && l_grad <= b_grad;
    outcome(
        pass,
        format!(
            "d={d}, budget {budget}: LDSD cos {l_cos:.3} (>=0.5), baseline cos {b_cos:.3} (<={limit:.3}), final |grad| LDSD {l_grad:.3e} vs baseline {b_grad:.3e}"
        ),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn calls_per_row(path: &Path) -> Vec<u64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let col = r.headers().unwrap().iter().position(|h| h == "oracle_calls").unwrap();
    let calls: Vec<u64> = r.records().map(|rec| rec.unwrap()[col].parse().unwrap()).collect();
    std::iter::once(0).chain(calls.iter().copied()).zip(&calls).map(|(a, b)| b - a).collect()
}

fn c7_budget_protocol() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let common = "objective = quadratic\ndim = 10\nseed = 3\nbudget = 600\ngamma_x = 0.1\n";
    let zo = write(dir.path(), "zo.cfg", &format!("{common}optimizer = zo_ldsd\nK = 5\nlabel = zo_ldsd\n"));
    let k5 = write(dir.path(), "k5.cfg", &format!("{common}optimizer = zo_sgd\nK = 5\nlabel = sgd_k5\n"));
    let k1 = write(dir.path(), "k1.cfg", &format!("{common}optimizer = zo_sgd\nK = 1\nlabel = sgd_k1\n"));
    let other = write(
        dir.path(),
        "other.cfg",
        "objective = quadratic\ndim = 10\nseed = 3\nbudget = 606\ngamma_x = 0.1\noptimizer = zo_sgd\nK = 5\n",
    );

    let out = dir.path().join("out");
    let summaries = cmd_compare(&[zo, k5, k1.clone()], None, &out).unwrap();
    let iters: Vec<u64> = summaries.iter().map(|s| s.iterations).collect();
    let calls: Vec<u64> = summaries.iter().map(|s| s.oracle_calls).collect();
    let per_iter = calls_per_row(&summaries[0].runs[0].trace_path);
    let six_each = per_iter.len() == 100 && per_iter.iter().all(|&c| c == 6);
    let refused = matches!(cmd_compare(&[k1, other], None, &out), Err(Error::BudgetMismatch(_)));

    let pass = six_each && iters == [100, 100, 300] && calls == [600, 600, 600] && refused;
    outcome(
        pass,
        format!(
            "calls/iter all 6: {six_each}; iterations {iters:?} (expect [100, 100, 300]); calls {calls:?}; mismatched budget refused: {refused}"
        ),
    )
}

fn c8_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let fixture = manifest_dir().join("fixtures/a9a_synthetic.libsvm");
    let configs = [
        "objective = quadratic\noptimizer = ldsd\nseed = 11\nhorizon = 200\nmc_samples = 200\ngamma_x = 0.5\n".to_string(),
        "objective = quadratic\noptimizer = zo_ldsd\nplugin = adamm\nseed = 11\nbudget = 1200\n".to_string(),
        format!(
            "objective = logistic\ndata = {}\noptimizer = zo_ldsd\nbaseline = loo\nseed = 5\nbudget = 600\n",
            fixture.display()
        ),
        "objective = quadratic\noptimizer = jaguar_signsgd\nK = 1\nseed = 2\nbudget = 400\n".to_string(),
    ];
    let mut identical = 0;
    for (i, text) in configs.iter().enumerate() {
        let path = write(dir.path(), &format!("c{i}.cfg"), text);
        let (cfg, bytes) = load_config(&path).unwrap();
        let a = execute(&cfg, &bytes, cfg.seed, &dir.path().join("a")).unwrap();
        let b = execute(&cfg, &bytes, cfg.seed, &dir.path().join("b")).unwrap();
        if std::fs::read(&a.trace_path).unwrap() == std::fs::read(&b.trace_path).unwrap() {
            identical += 1;
        }
    }
    // Parallel execution through the comparison driver must not change the bytes.
    let p = write(dir.path(), "par.cfg", "objective = quadratic\noptimizer = zo_sgd\nseed = 1\nbudget = 600\n");
    let (cfg, bytes) = load_config(&p).unwrap();
    let seeds = [1u64, 2, 3, 4];
    let par = cmd_compare(&[p], Some(&seeds), &dir.path().join("par")).unwrap();
    let mut par_identical = true;
    for run in &par[0].runs {
        let seq = execute(&cfg, &bytes, run.seed, &dir.path().join("seq")).unwrap();
        par_identical &= std::fs::read(&run.trace_path).unwrap() == std::fs::read(&seq.trace_path).unwrap();
    }
    outcome(
        identical == configs.len() && par_identical,
        format!("{identical}/{} configs byte-identical on rerun; parallel compare matches sequential: {par_identical}", configs.len()),
    )
}

/// Per-run descent inequality, summed over seeds.
fn c9_descent_accounting() -> Outcome {
    let text = "objective = quadratic\ndim = 20\ncurv_min = 0.1\ncurv_max = 1\noptimizer = ldsd\nK = 5\nepsilon = 0.5\ngamma_x = 0.5\ngamma_mu = 0.01\nx0 = 3\nhorizon = 200\nmc_samples = 1000\nseed = 0\n";
    let cfg = parse_config(text, Path::new(".")).unwrap();
    let f = cfg.objective.build().unwrap();
    let l = f.smoothness_hint().unwrap();
    let gamma_x = cfg.steps.gamma_x;
    assert!(gamma_x <= 1.0 / (2.0 * l));
    let rows: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let mut trace: Vec<TraceRecord> = Vec::new();
            let x0 = ParamVector::filled(f.dim(), cfg.x0);
            run(&cfg.optimizer_config(), f.as_ref(), x0, cfg.stop, seed, "descent", &mut trace).unwrap();
            let acc = descent_accounting(&trace, gamma_x, 0.0).unwrap();
            (acc.violation(), acc.rhs)
        })
        .collect();
    let violation: f64 = rows.iter().map(|r| r.0).sum();
    let total: f64 = rows.iter().map(|r| r.1).sum();
    let violating = rows.iter().filter(|r| r.0 > 0.0).count();
    let mass = violation / total;
    outcome(mass <= 0.05, format!("violation mass {mass:.4} (limit 0.05), {violating}/50 runs with any violation"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("isotropic alignment is 1/d", c1_isotropic_alignment),
        ("two-point exactness on quadratics", c2_two_point_exactness),
        ("mean-baseline score estimate unbiased", c3_reinforce_unbiasedness),
        ("alignment Hessian bound", c4_hessian_bound),
        ("alignment dynamics: growth, floor, saddle", c5_alignment_dynamics),
        ("toy least-squares experiment", c6_toy_experiment),
        ("oracle-call budget protocol", c7_budget_protocol),
        ("byte-identical traces", c8_determinism),
        ("descent accounting", c9_descent_accounting),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {verdict} {name} [{:.1}s] {}", i + 1, start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed.push(i + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
