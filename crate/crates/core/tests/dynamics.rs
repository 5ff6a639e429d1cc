//! Alignment behaviour of full optimizer runs.

use std::path::Path;

use zoldsd::alignlab::{
    dynamics_check, DynamicsConfig, DynamicsSchedule, GradientSource, MuGradMode,
    MuStart,
};
use zoldsd::bench::config::parse_config;
use zoldsd::estimators::BaselineKind;
use zoldsd::optimizers::run;
use zoldsd::trace::TraceRecord;
use zoldsd::vector::ParamVector;

fn trace_of(text: &str, seed: u64) -> Vec<TraceRecord> {
    let cfg = parse_config(text, Path::new(".")).unwrap();
    let f = cfg.objective.build().unwrap();
    let mut trace = Vec::new();
    let x0 = ParamVector::filled(f.dim(), cfg.x0);
    run(&cfg.optimizer_config(), f.as_ref(), x0, cfg.stop, seed, "t", &mut trace).unwrap();
    trace
}

/// With a single isotropic direction, `cos²(g_x, ∇f)` is the alignment
/// itself, so its running mean tracks `1/d`.
#[test]
fn isotropic_sampling_rate() {
    for d in [16usize, 64, 256] {
        let text = format!(
            "objective = quadratic\ndim = {d}\noptimizer = ldsd\nK = 1\ngamma_mu = 0\nmu_init = zero\ngamma_x = 0.5\nx0 = 5\nhorizon = 10000\nseed = 4\n"
        );
        let trace = trace_of(&text, 4);
        let c: Vec<f64> = trace.iter().filter_map(|r| r.align_cos).map(|c| c * c).collect();
        assert_eq!(c.len(), 10_000);
        let scaled = c.iter().sum::<f64>() / c.len() as f64 * d as f64;
        assert!((0.8..=1.2).contains(&scaled), "d={d}: mean alignment × d = {scaled}");
    }
}

/// Starting collinear with the gradient keeps the expected alignment above
/// 1/5 for a whole run, provided `x` moves slowly relative to the policy.
/// (At `γ_x = 0.2` the gradient outruns `μ`, which then settles orthogonal
/// to it and stalls the run.)
#[test]
fn collinear_start_keeps_alignment() {
    let text = "objective = quadratic\ndim = 20\noptimizer = ldsd\nK = 5\nmu_init = collinear\nepsilon = 0.05\ngamma_x = 0.05\ngamma_mu = 0.1\nx0 = 3\nhorizon = 300\nmc_samples = 2000\nseed = 9\n";
    for seed in 0..5 {
        let trace = trace_of(text, seed);
        let worst = trace.iter().filter_map(|r| r.mc_alignment).fold(f64::INFINITY, f64::min);
        // Alignment is in [0, 1], so one estimate's stderr is at most 0.5/√n.
        let slack = 3.0 * 0.5 / 2000f64.sqrt();
        assert!(worst >= 0.2 - slack, "seed {seed}: min E[C] {worst}");
    }
}

/// Score-function ascent on a fixed gradient learns alignment from zero,
/// the mechanism the least-squares experiment relies on.
#[test]
fn reinforce_learns_a_frozen_gradient() {
    let d = 32;
    let g = ParamVector::new((0..d).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect()).unwrap();
    let report = dynamics_check(
        GradientSource::Frozen(g.clone()),
        &DynamicsConfig {
            start: MuStart::Zero,
            schedule: DynamicsSchedule::Constant { gamma_mu: 1e-2, epsilon: 0.1, gamma_x: 0.0 },
            mode: MuGradMode::Reinforce { k: 5, baseline: BaselineKind::Mean },
            horizon: 400,
            n_per_estimate: 2000,
            seed: 17,
        },
    )
    .unwrap();
    let start = report.initial.alignment.mean;
    let end = report.terminal().alignment.mean;
    assert!((start - 1.0 / d as f64).abs() < 0.01, "{start}");
    assert!(end > 0.8, "E[C] {start} -> {end}");
}

/// `δ = 1/4` band under the theoretical schedules, with interleaved
/// gradient steps on a quadratic.
#[test]
fn theoretical_schedule_with_moving_gradient() {
    let cfg = parse_config("objective = quadratic\ndim = 16\noptimizer = ldsd\nseed = 0\nx0 = 2\n", Path::new(".")).unwrap();
    let f = cfg.objective.build().unwrap();
    let x0 = ParamVector::filled(16, 2.0);
    let report = dynamics_check(
        GradientSource::Oracle { oracle: f.as_ref(), x0 },
        &DynamicsConfig {
            start: MuStart::Angle { cos_beta: 0.5, norm: 1.0 },
            schedule: DynamicsSchedule::Theoretical { delta: 0.25 },
            mode: MuGradMode::FiniteDifference { rel_step: 1e-4 },
            horizon: 150,
            n_per_estimate: 4000,
            seed: 3,
        },
    )
    .unwrap();
    let floor = report.floor_value.unwrap();
    assert!((floor - 0.355).abs() < 1e-3, "{floor}");
    let t = report.terminal().alignment;
    assert!(t.mean >= floor - 3.0 * t.stderr, "{} vs floor {floor}", t.mean);
    assert!(report.monotone_fraction >= 0.95, "{}", report.monotone_fraction);
    assert!(report.mu_norm_held);
}
