//! Flat `key = value` run configuration.
//!
//! ```text
//! # toy least-squares run
//! objective = least_squares
//! data = a9a_synthetic.libsvm
//! optimizer = ldsd
//! seed = 1
//! gamma_x = 5
//! gamma_mu = 1.4e-5
//! epsilon = 1.2e-2
//! budget = 5000
//! ```
//!
//! Relative `data` paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimators::{BaselineKind, RewardSign};
use crate::objective::{
    least_squares_objective, logistic_objective, quadratic_objective, read_libsvm_file, Objective,
};
use crate::optimizers::{Method, OptimizerConfig, PluginRule, Schedule, StepSizes, Stop, ZoSettings};
use crate::sampling::MuInit;
use crate::vector::ParamVector;

/// Iteration horizon used when a config sets neither `budget` nor `horizon`.
pub const DEFAULT_HORIZON: u64 = 1000;

const KNOWN_KEYS: &[&str] = &[
    "objective",
    "data",
    "intercept",
    "dim",
    "curv_min",
    "curv_max",
    "optimizer",
    "K",
    "tau",
    "epsilon",
    "gamma_x",
    "gamma_mu",
    "schedule",
    "plugin",
    "momentum",
    "beta1",
    "beta2",
    "jaguar_beta",
    "floor",
    "mu_init",
    "mu_scale",
    "reward_sign",
    "normalize_zo",
    "baseline",
    "seed",
    "budget",
    "horizon",
    "mc_samples",
    "x0",
    "label",
];

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    /// `½ Σ c_i (x_i − 1)²` with curvatures `c_i` evenly spaced in
    /// `[curv_min, curv_max]`.
    Quadratic { dim: usize, curv_min: f64, curv_max: f64 },
    LeastSquares { data: PathBuf, intercept: bool },
    Logistic { data: PathBuf, intercept: bool },
}

impl ObjectiveSpec {
    pub fn build(&self) -> Result<Box<dyn Objective>> {
        Ok(match self {
            ObjectiveSpec::Quadratic { dim, curv_min, curv_max } => {
                let diag: Vec<f64> = (0..*dim)
                    .map(|i| {
                        if *dim == 1 {
                            *curv_max
                        } else {
                            curv_min + (curv_max - curv_min) * i as f64 / (*dim - 1) as f64
                        }
                    })
                    .collect();
                Box::new(quadratic_objective(&ParamVector::new(diag)?, &ParamVector::filled(*dim, 1.0))?)
            }
            ObjectiveSpec::LeastSquares { data, intercept } => {
                let mut ds = read_libsvm_file(data)?;
                if *intercept {
                    ds = ds.with_intercept();
                }
                Box::new(least_squares_objective(ds)?)
            }
            ObjectiveSpec::Logistic { data, intercept } => {
                let mut ds = read_libsvm_file(data)?;
                if *intercept {
                    ds = ds.with_intercept();
                }
                Box::new(logistic_objective(ds)?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Ldsd,
    ZoLdsd,
    /// Gaussian-sampling baselines: forward-only step with a frozen
    /// zero-mean policy and the named update rule.
    ZoSgd,
    ZoAdamm,
    JaguarSignSgd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Ldsd => "ldsd",
            OptimizerKind::ZoLdsd => "zo_ldsd",
            OptimizerKind::ZoSgd => "zo_sgd",
            OptimizerKind::ZoAdamm => "zo_adamm",
            OptimizerKind::JaguarSignSgd => "jaguar_signsgd",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, OptimizerKind::ZoSgd | OptimizerKind::ZoAdamm | OptimizerKind::JaguarSignSgd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub objective: ObjectiveSpec,
    pub optimizer: OptimizerKind,
    pub k: usize,
    pub tau: f64,
    pub epsilon: f64,
    pub steps: StepSizes,
    pub plugin: PluginRule,
    pub mu_init: MuInit,
    /// Norm of `μ⁰` for `random_unit` and `collinear`.
    pub mu_scale: f64,
    pub reward_sign: RewardSign,
    pub normalize_zo: bool,
    pub baseline: BaselineKind,
    pub seed: u64,
    pub stop: Stop,
    pub mc_samples: usize,
    pub x0: f64,
    pub label: String,
}

impl RunConfig {
    pub fn method(&self) -> Method {
        match self.optimizer {
            OptimizerKind::Ldsd => Method::Ldsd { k: self.k, baseline: self.baseline },
            _ => Method::ZoLdsd(ZoSettings {
                k: self.k,
                tau: self.tau,
                plugin: self.plugin,
                reward_sign: self.reward_sign,
                normalize: self.normalize_zo,
            }),
        }
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            method: self.method(),
            steps: self.steps,
            epsilon: self.epsilon,
            mu_init: self.mu_init,
            mu_scale: self.mu_scale,
            telemetry_samples: self.mc_samples,
        }
    }

    pub fn budget(&self) -> Option<u64> {
        match self.stop {
            Stop::Budget(b) => Some(b),
            Stop::Horizon(_) => None,
        }
    }
}

fn err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), msg: msg.into() }
}

struct Entries {
    map: BTreeMap<String, String>,
}

impl Entries {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| err(key, "missing required key"))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| err(key, format!("cannot parse {v:?}"))),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        let v: f64 = self.parse(key, default)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(err(key, "must be finite"))
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.real(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(err(key, format!("must be > 0, got {v}")))
        }
    }

    fn unit_interval(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.real(key, default)?;
        if (0.0..1.0).contains(&v) {
            Ok(v)
        } else {
            Err(err(key, format!("must be in [0, 1), got {v}")))
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(err(key, format!("expected a boolean, got {v:?}"))),
        }
    }
}

fn parse_entries(text: &str) -> Result<Entries> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key=value, got {line:?}") })?;
        let (k, v) = (k.trim(), v.trim());
        if !KNOWN_KEYS.contains(&k) {
            return Err(err(k, "unknown key"));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(err(k, "duplicate key"));
        }
    }
    Ok(Entries { map })
}

/// Parses config text. `base_dir` anchors relative data paths.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let e = parse_entries(text)?;

    let data_path = || -> Result<PathBuf> {
        let p = PathBuf::from(e.require("data")?);
        Ok(if p.is_relative() { base_dir.join(p) } else { p })
    };
    let objective = match e.require("objective")? {
        "quadratic" => {
            let dim: usize = e.parse("dim", 20)?;
            if dim == 0 {
                return Err(err("dim", "must be >= 1"));
            }
            let curv_min = e.positive("curv_min", 0.1)?;
            let curv_max = e.positive("curv_max", 1.0)?;
            if curv_min > curv_max {
                return Err(err("curv_min", "must not exceed curv_max"));
            }
            ObjectiveSpec::Quadratic { dim, curv_min, curv_max }
        }
        "least_squares" => ObjectiveSpec::LeastSquares { data: data_path()?, intercept: e.flag("intercept")? },
        "logistic" => ObjectiveSpec::Logistic { data: data_path()?, intercept: e.flag("intercept")? },
        other => return Err(err("objective", format!("unknown objective {other:?}"))),
    };

    let optimizer = match e.require("optimizer")? {
        "ldsd" => OptimizerKind::Ldsd,
        "zo_ldsd" => OptimizerKind::ZoLdsd,
        "zo_sgd" => OptimizerKind::ZoSgd,
        "zo_adamm" => OptimizerKind::ZoAdamm,
        "jaguar_signsgd" => OptimizerKind::JaguarSignSgd,
        other => return Err(err("optimizer", format!("unknown optimizer {other:?}"))),
    };
    let seed: u64 = e.require("seed")?.parse().map_err(|_| err("seed", "expected an unsigned integer"))?;

    let k: usize = e.parse("K", 5)?;
    if k == 0 {
        return Err(err("K", "must be >= 1"));
    }
    let tau = e.positive("tau", 1e-3)?;
    let epsilon = e.positive("epsilon", 1.0)?;
    let gamma_x = e.positive("gamma_x", 1e-3)?;
    let mut gamma_mu = e.real("gamma_mu", 1e-3)?;
    if gamma_mu < 0.0 {
        return Err(err("gamma_mu", "must be >= 0"));
    }
    let schedule = match e.get("schedule").unwrap_or("constant") {
        "constant" => Schedule::Constant,
        "cosine" => Schedule::Cosine,
        other => return Err(err("schedule", format!("unknown schedule {other:?}"))),
    };

    let momentum = e.unit_interval("momentum", 0.9)?;
    let beta1 = e.unit_interval("beta1", 0.9)?;
    let beta2 = e.unit_interval("beta2", 0.999)?;
    let jaguar_beta = e.unit_interval("jaguar_beta", 0.9)?;
    let floor = e.positive("floor", 1e-8)?;
    let sgd = PluginRule::SgdMomentum { beta: momentum };
    let adamm = PluginRule::Adamm { beta1, beta2, floor };
    let jaguar = PluginRule::JaguarSign { beta: jaguar_beta };
    let named_plugin = match e.get("plugin") {
        None => None,
        Some("sgd_momentum") => Some(sgd),
        Some("adamm") => Some(adamm),
        Some("jaguar_sign") => Some(jaguar),
        Some(other) => return Err(err("plugin", format!("unknown plugin {other:?}"))),
    };

    let mut mu_init = match e.get("mu_init").unwrap_or("random_unit") {
        "random_unit" => MuInit::RandomUnit,
        "collinear" => MuInit::Collinear,
        "zero" => MuInit::Zero,
        other => return Err(err("mu_init", format!("unknown initialization {other:?}"))),
    };

    let plugin = match optimizer {
        OptimizerKind::ZoSgd | OptimizerKind::ZoAdamm | OptimizerKind::JaguarSignSgd => {
            let rule = match optimizer {
                OptimizerKind::ZoSgd => sgd,
                OptimizerKind::ZoAdamm => adamm,
                _ => jaguar,
            };
            if named_plugin.is_some_and(|p| p != rule) {
                return Err(err("plugin", "baselines fix their own update rule"));
            }
            if e.get("gamma_mu").is_some() && gamma_mu != 0.0 {
                return Err(err("gamma_mu", "baselines use a frozen policy; set 0 or omit"));
            }
            if e.get("mu_init").is_some() && mu_init != MuInit::Zero {
                return Err(err("mu_init", "baselines sample around a zero mean"));
            }
            gamma_mu = 0.0;
            mu_init = MuInit::Zero;
            rule
        }
        _ => named_plugin.unwrap_or(sgd),
    };
    if gamma_mu > 0.0 && k < 2 {
        return Err(err("K", "learning the policy needs K >= 2"));
    }

    let reward_sign = match e.get("reward_sign").unwrap_or("negative") {
        "negative" | "-1" => RewardSign::Negative,
        "positive" | "+1" | "1" => RewardSign::Positive,
        other => return Err(err("reward_sign", format!("expected negative or positive, got {other:?}"))),
    };
    let baseline = match e.get("baseline").unwrap_or("mean") {
        "mean" => BaselineKind::Mean,
        "loo" | "leave_one_out" => BaselineKind::LeaveOneOut,
        other => return Err(err("baseline", format!("unknown baseline {other:?}"))),
    };

    let stop = match (e.get("budget"), e.get("horizon")) {
        (Some(_), Some(_)) => return Err(err("budget", "set exactly one of budget and horizon")),
        (Some(_), None) => Stop::Budget(e.parse("budget", 0)?),
        (None, Some(_)) => Stop::Horizon(e.parse("horizon", 0)?),
        (None, None) => Stop::Horizon(DEFAULT_HORIZON),
    };
    match stop {
        Stop::Budget(0) => return Err(err("budget", "must be >= 1")),
        Stop::Horizon(0) => return Err(err("horizon", "must be >= 1")),
        _ => {}
    }
    let mc_samples: usize = e.parse("mc_samples", 0)?;
    if mc_samples != 0 && mc_samples < crate::alignlab::MIN_SAMPLES {
        return Err(err("mc_samples", format!("must be 0 or >= {}", crate::alignlab::MIN_SAMPLES)));
    }

    let cfg = RunConfig {
        objective,
        optimizer,
        k,
        tau,
        epsilon,
        steps: StepSizes { gamma_x, gamma_mu, schedule },
        plugin,
        mu_init,
        mu_scale: e.positive("mu_scale", 1.0)?,
        reward_sign,
        normalize_zo: e.flag("normalize_zo")?,
        baseline,
        seed,
        stop,
        mc_samples,
        x0: e.real("x0", 0.0)?,
        label: e.get("label").unwrap_or(optimizer.name()).to_string(),
    };
    if cfg.optimizer == OptimizerKind::Ldsd && cfg.baseline == BaselineKind::LeaveOneOut && k < 2 {
        return Err(err("K", "leave-one-out needs K >= 2"));
    }
    crate::optimizers::iterations_for(&cfg.method(), cfg.stop).map_err(|e| err("budget", e.to_string()))?;
    Ok(cfg)
}

/// Reads and validates a config file, returning it with its raw bytes (the
/// bytes feed the run id).
pub fn load_config(path: &Path) -> Result<(RunConfig, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| err("file", "not valid UTF-8"))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok((parse_config(&text, base)?, bytes))
}
