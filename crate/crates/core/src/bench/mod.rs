//! Experiment orchestration behind the `zoldsd` binary.
//!
//! Every run writes `<out>/<run_id>.csv`, where the run id is the first 12
//! hex digits of `sha256(config bytes ‖ seed)`. Identical config bytes and
//! seed give byte-identical output.

pub mod config;
pub mod verify;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use config::{load_config, parse_config, ObjectiveSpec, OptimizerKind, RunConfig};

use crate::alignlab::{landscape_grid, GridSpec, LandscapeCell};
use crate::error::{Error, Result};
use crate::optimizers::{iterations_for, run, Stop};
use crate::rng::{stream, Stream};
use crate::trace::CsvTraceWriter;
use crate::vector::{norm, ParamVector};

/// Environment variable that overrides the `--out` directory.
pub const OUT_ENV: &str = "ZOLDSD_OUT";

pub fn run_id(config_bytes: &[u8], seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(config_bytes);
    h.update(seed.to_le_bytes());
    hex::encode(h.finalize())[..12].to_string()
}

/// Resolves the output directory: the environment variable wins over the
/// flag, which wins over the current directory.
pub fn resolve_out_dir(flag: Option<&Path>) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => flag.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub label: String,
    pub seed: u64,
    pub iterations: u64,
    pub oracle_calls: u64,
    pub final_loss: f64,
    pub final_grad_norm: Option<f64>,
    pub trace_path: PathBuf,
}

/// Runs one config with one seed and writes its trace.
pub fn execute(cfg: &RunConfig, config_bytes: &[u8], seed: u64, out_dir: &Path) -> Result<RunSummary> {
    let objective = cfg.objective.build()?;
    let id = run_id(config_bytes, seed);
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("{id}.csv"));
    let mut writer = CsvTraceWriter::new(BufWriter::new(File::create(&path)?))?;
    let x0 = ParamVector::filled(objective.dim(), cfg.x0);
    let outcome = run(&cfg.optimizer_config(), objective.as_ref(), x0, cfg.stop, seed, &id, &mut writer)?;
    writer.finish()?;
    let x = &outcome.state.x;
    Ok(RunSummary {
        run_id: id,
        label: cfg.label.clone(),
        seed,
        iterations: outcome.iterations,
        oracle_calls: outcome.state.oracle_calls,
        final_loss: objective.value(x),
        final_grad_norm: objective.gradient(x).map(|g| norm(&g)),
        trace_path: path,
    })
}

/// `zoldsd run`: one trace per seed (the config's own seed by default).
pub fn cmd_run(path: &Path, seeds: Option<&[u64]>, out_dir: &Path) -> Result<Vec<RunSummary>> {
    let (cfg, bytes) = load_config(path)?;
    let seeds = seeds.map(<[u64]>::to_vec).unwrap_or_else(|| vec![cfg.seed]);
    seeds.iter().map(|&s| execute(&cfg, &bytes, s, out_dir)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Quartiles { q1: quantile(&v, 0.25), median: quantile(&v, 0.5), q3: quantile(&v, 0.75) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub label: String,
    pub optimizer: OptimizerKind,
    pub k: usize,
    pub budget: u64,
    pub iterations: u64,
    pub oracle_calls: u64,
    pub n_seeds: usize,
    pub final_loss: Quartiles,
    pub final_grad_norm: Option<Quartiles>,
    pub runs: Vec<RunSummary>,
}

pub const SUMMARY_HEADER: [&str; 12] = [
    "label",
    "optimizer",
    "K",
    "budget",
    "iterations",
    "oracle_calls",
    "n_seeds",
    "final_loss_median",
    "final_loss_iqr",
    "final_grad_norm_median",
    "final_grad_norm_iqr",
    "run_ids",
];

/// Refuses a comparison whose configs do not share objective, budget and
/// seeds.
fn check_comparable(cfgs: &[RunConfig], seeds: Option<&[u64]>) -> Result<u64> {
    let first = cfgs.first().ok_or_else(|| Error::Config { key: "config".into(), msg: "no configs given".into() })?;
    let budget_of = |c: &RunConfig| {
        c.budget().ok_or_else(|| Error::BudgetMismatch(format!("{} sets a horizon instead of a budget", c.label)))
    };
    let budget = budget_of(first)?;
    for c in cfgs {
        let b = budget_of(c)?;
        if b != budget {
            return Err(Error::BudgetMismatch(format!("{} has budget {b}, {} has {budget}", c.label, first.label)));
        }
        if c.objective != first.objective {
            return Err(Error::Config { key: "objective".into(), msg: format!("{} uses a different objective", c.label) });
        }
        if seeds.is_none() && c.seed != first.seed {
            return Err(Error::Config {
                key: "seed".into(),
                msg: format!("{} uses seed {}; pass --seeds to compare on a common list", c.label, c.seed),
            });
        }
        if c.x0 != first.x0 {
            return Err(Error::Config { key: "x0".into(), msg: format!("{} starts from a different point", c.label) });
        }
    }
    Ok(budget)
}

/// `zoldsd compare`: every config on every seed under one oracle budget.
/// Runs execute in parallel; the summary is written to `<out>/summary.csv`.
pub fn cmd_compare(paths: &[PathBuf], seeds: Option<&[u64]>, out_dir: &Path) -> Result<Vec<MethodSummary>> {
    let loaded: Vec<(RunConfig, Vec<u8>)> = paths.iter().map(|p| load_config(p)).collect::<Result<_>>()?;
    let cfgs: Vec<RunConfig> = loaded.iter().map(|(c, _)| c.clone()).collect();
    let budget = check_comparable(&cfgs, seeds)?;
    let seeds = seeds.map(<[u64]>::to_vec).unwrap_or_else(|| vec![cfgs[0].seed]);
    std::fs::create_dir_all(out_dir)?;

    let jobs: Vec<(usize, u64)> = (0..loaded.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let results: Vec<Result<RunSummary>> =
        jobs.par_iter().map(|&(i, s)| execute(&loaded[i].0, &loaded[i].1, s, out_dir)).collect();
    let mut runs: Vec<Vec<RunSummary>> = vec![Vec::new(); loaded.len()];
    for ((i, _), r) in jobs.iter().zip(results) {
        runs[*i].push(r?);
    }

    let mut summaries = Vec::with_capacity(cfgs.len());
    for (cfg, runs) in cfgs.iter().zip(runs) {
        let losses: Vec<f64> = runs.iter().map(|r| r.final_loss).collect();
        let grads: Option<Vec<f64>> = runs.iter().map(|r| r.final_grad_norm).collect();
        let final_loss = quartiles(&losses).ok_or(Error::NonFinite("final loss"))?;
        summaries.push(MethodSummary {
            label: cfg.label.clone(),
            optimizer: cfg.optimizer,
            k: cfg.k,
            budget,
            iterations: iterations_for(&cfg.method(), Stop::Budget(budget))?,
            oracle_calls: runs[0].oracle_calls,
            n_seeds: runs.len(),
            final_loss,
            final_grad_norm: grads.as_deref().and_then(quartiles),
            runs,
        });
    }

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(out_dir.join("summary.csv"))?));
    w.write_record(SUMMARY_HEADER)?;
    for s in &summaries {
        let (gm, gi) = match s.final_grad_norm {
            Some(q) => (q.median.to_string(), q.iqr().to_string()),
            None => (String::new(), String::new()),
        };
        let ids: Vec<&str> = s.runs.iter().map(|r| r.run_id.as_str()).collect();
        w.write_record([
            s.label.clone(),
            s.optimizer.name().to_string(),
            s.k.to_string(),
            s.budget.to_string(),
            s.iterations.to_string(),
            s.oracle_calls.to_string(),
            s.n_seeds.to_string(),
            s.final_loss.median.to_string(),
            s.final_loss.iqr().to_string(),
            gm,
            gi,
            ids.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(summaries)
}

pub const LANDSCAPE_HEADER: [&str; 4] = ["mu1", "mu2", "mean", "stderr"];

pub fn write_landscape_csv<W: Write>(cells: &[Vec<LandscapeCell>], w: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    w.write_record(LANDSCAPE_HEADER)?;
    for cell in cells.iter().flatten() {
        w.write_record([
            cell.mu[0].to_string(),
            cell.mu[1].to_string(),
            cell.estimate.mean.to_string(),
            cell.estimate.stderr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeOptions {
    pub g: [f64; 2],
    pub epsilon: f64,
    pub grid: GridSpec,
    pub n: usize,
    pub seed: u64,
}

impl Default for LandscapeOptions {
    fn default() -> Self {
        Self { g: [1.0, 0.0], epsilon: 0.5, grid: GridSpec::symmetric(2.0, 21), n: 20_000, seed: 0 }
    }
}

/// `zoldsd landscape`: writes `<out>/landscape.csv`.
pub fn cmd_landscape(opts: &LandscapeOptions, out_dir: &Path) -> Result<(PathBuf, Vec<Vec<LandscapeCell>>)> {
    let cells = landscape_grid(&opts.g, opts.epsilon, &opts.grid, opts.n, &mut stream(opts.seed, Stream::Verify))?;
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("landscape.csv");
    write_landscape_csv(&cells, BufWriter::new(File::create(&path)?))?;
    Ok((path, cells))
}
