//! Black-box objectives and the concrete test problems used by the harness.
//!
//! Optimizers only ever see [`Objective::value`]. The exact gradient is used
//! by the directional-derivative driver and for diagnostics (gradient norm,
//! estimator cosine), never by the forward-only driver's updates.

mod libsvm;
pub mod synthetic;

pub use libsvm::{parse_libsvm, read_libsvm_file, Dataset, SparseRow};

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::vector::{check_dim, dot, ParamVector};

/// Scalar loss over a parameter vector.
///
/// Implementations are immutable after construction and may be evaluated
/// concurrently.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Exact gradient, when the objective can provide one.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Known Lipschitz constant of the gradient.
    fn smoothness_hint(&self) -> Option<f64> {
        None
    }
}

/// `f(x) = ½ Σ diag_i (x_i − shift_i)²`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    diag: Vec<f64>,
    shift: Vec<f64>,
}

pub fn quadratic_objective(diag: &ParamVector, shift: &ParamVector) -> Result<Quadratic> {
    check_dim(diag.dim(), shift.dim())?;
    if let Some(&bad) = diag.iter().find(|&&d| d <= 0.0) {
        return Err(Error::NonPositive { name: "diag entry", value: bad });
    }
    Ok(Quadratic { diag: diag.to_vec(), shift: shift.to_vec() })
}

impl Quadratic {
    pub fn minimizer(&self) -> &[f64] {
        &self.shift
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.shift)
            .zip(&self.diag)
            .map(|((xi, si), di)| di * (xi - si) * (xi - si))
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(x.iter().zip(&self.shift).zip(&self.diag).map(|((xi, si), di)| di * (xi - si)).collect())
    }

    fn smoothness_hint(&self) -> Option<f64> {
        self.diag.iter().copied().reduce(f64::max)
    }
}

/// Mean squared residual of a linear model, `(1/2n) Σ (⟨w, φ_i⟩ − y_i)²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    data: Dataset,
}

pub fn least_squares_objective(data: Dataset) -> Result<LeastSquares> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(LeastSquares { data })
}

impl LeastSquares {
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Largest eigenvalue of `(1/n) ΦᵀΦ` by power iteration.
    pub fn lipschitz_estimate(&self, iters: usize) -> f64 {
        gram_top_eigenvalue(&self.data, iters)
    }
}

impl Objective for LeastSquares {
    fn dim(&self) -> usize {
        self.data.n_features()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let n = self.data.len() as f64;
        self.data
            .rows()
            .iter()
            .map(|row| {
                let r = row.dot(w) - row.label;
                r * r
            })
            .sum::<f64>()
            / (2.0 * n)
    }

    fn gradient(&self, w: &[f64]) -> Option<Vec<f64>> {
        let n = self.data.len() as f64;
        let mut g = vec![0.0; self.dim()];
        for row in self.data.rows() {
            let r = row.dot(w) - row.label;
            row.add_to(r / n, &mut g);
        }
        Some(g)
    }
}

/// Mean logistic loss `(1/n) Σ log(1 + exp(−y_i ⟨w, φ_i⟩))` for ±1 labels.
#[derive(Debug, Clone)]
pub struct Logistic {
    data: Dataset,
}

pub fn logistic_objective(data: Dataset) -> Result<Logistic> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(row) = data.rows().iter().find(|r| r.label != 1.0 && r.label != -1.0) {
        return Err(Error::InvalidLabel { label: row.label });
    }
    Ok(Logistic { data })
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Objective for Logistic {
    fn dim(&self) -> usize {
        self.data.n_features()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let n = self.data.len() as f64;
        self.data.rows().iter().map(|row| softplus(-row.label * row.dot(w))).sum::<f64>() / n
    }

    fn gradient(&self, w: &[f64]) -> Option<Vec<f64>> {
        let n = self.data.len() as f64;
        let mut g = vec![0.0; self.dim()];
        for row in self.data.rows() {
            let y = row.label;
            let coeff = -y * sigmoid(-y * row.dot(w)) / n;
            row.add_to(coeff, &mut g);
        }
        Some(g)
    }
}

/// Objective assembled from closures; handy for ad hoc test functions.
pub struct FnObjective<F, G = fn(&[f64]) -> Vec<f64>> {
    dim: usize,
    value: F,
    gradient: Option<G>,
    smoothness: Option<f64>,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, value: F) -> Self {
        Self { dim, value, gradient: None, smoothness: None }
    }
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn with_gradient<G2>(self, gradient: G2) -> FnObjective<F, G2>
    where
        G2: Fn(&[f64]) -> Vec<f64> + Send + Sync,
    {
        FnObjective { dim: self.dim, value: self.value, gradient: Some(gradient), smoothness: self.smoothness }
    }

    pub fn with_smoothness(mut self, l: f64) -> Self {
        self.smoothness = Some(l);
        self
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    fn smoothness_hint(&self) -> Option<f64> {
        self.smoothness
    }
}

/// Wraps an objective and counts `value` evaluations.
pub struct CountingObjective<'a> {
    inner: &'a dyn Objective,
    calls: AtomicU64,
}

impl<'a> CountingObjective<'a> {
    pub fn new(inner: &'a dyn Objective) -> Self {
        Self { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Objective for CountingObjective<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.inner.gradient(x)
    }

    fn smoothness_hint(&self) -> Option<f64> {
        self.inner.smoothness_hint()
    }
}

fn gram_top_eigenvalue(data: &Dataset, iters: usize) -> f64 {
    let d = data.n_features();
    let n = data.len() as f64;
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        let mut w = vec![0.0; d];
        for row in data.rows() {
            row.add_to(row.dot(&v) / n, &mut w);
        }
        lambda = dot(&w, &v);
        let nw = crate::vector::norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    lambda
}
