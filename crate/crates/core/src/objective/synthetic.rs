//! Synthetic stand-in for the `a9a` benchmark.
//!
//! `a9a` has 123 binary features that one-hot encode 14 categorical
//! attributes. The generator reproduces that layout: every row activates
//! exactly one feature per attribute group, with skewed category
//! frequencies. Feature values are `1/√14` so every row has unit norm,
//! which keeps the Gram spectrum (and therefore the step sizes the toy
//! experiment uses) on the same scale as row-normalized `a9a`. Labels are
//! ±1 from a noisy planted linear model.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::rng::{stream, Stream};

/// Category counts of the 14 `a9a` attribute groups (sum 123).
pub const A9A_GROUPS: [usize; 14] = [5, 7, 5, 16, 5, 7, 14, 6, 5, 2, 2, 2, 5, 42];

pub fn a9a_like(n_rows: usize, seed: u64) -> Dataset {
    let mut rng = stream(seed, Stream::Data);
    let value = 1.0 / (A9A_GROUPS.len() as f64).sqrt();

    // Per-group cumulative category weights, decaying geometrically.
    let cdfs: Vec<Vec<f64>> = A9A_GROUPS
        .iter()
        .map(|&size| {
            let ratio: f64 = rng.random_range(0.45..0.9);
            let weights: Vec<f64> = (0..size).map(|k| ratio.powi(k as i32)).collect();
            let total: f64 = weights.iter().sum();
            weights
                .iter()
                .scan(0.0, |acc, w| {
                    *acc += w / total;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    let planted: Vec<f64> = (0..123).map(|_| StandardNormal.sample(&mut rng)).collect();

    let mut rows = Vec::with_capacity(n_rows);
    for r in 0..n_rows {
        let mut entries = Vec::with_capacity(A9A_GROUPS.len());
        let mut offset = 0usize;
        for (size, cdf) in A9A_GROUPS.iter().zip(&cdfs) {
            let u: f64 = rng.random();
            // Row 0 takes the rarest category everywhere so the parsed
            // dimension is always 123.
            let k = if r == 0 { size - 1 } else { cdf.iter().position(|&c| u <= c).unwrap_or(size - 1) };
            entries.push(((offset + k + 1) as u32, value));
            offset += size;
        }
        let score: f64 = entries.iter().map(|&(i, v)| v * planted[i as usize - 1]).sum::<f64>();
        let noise: f64 = StandardNormal.sample(&mut rng);
        let label = if score + 0.5 * noise >= 0.0 { 1.0 } else { -1.0 };
        rows.push((entries, label));
    }
    Dataset::from_rows(rows).expect("generator produces valid rows")
}
