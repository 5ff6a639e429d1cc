//! Zeroth-order optimization with a learnable direction-sampling policy.

pub mod alignlab;
pub mod bench;
pub mod error;
pub mod estimators;
pub mod objective;
pub mod optimizers;
pub mod rng;
pub mod sampling;
pub mod trace;
pub mod vector;

pub use error::{Error, Result};
pub use vector::ParamVector;

// The book's code listings run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/alignment.md")]
    mod alignment {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/optimizers.md")]
    mod optimizers {}
    #[doc = include_str!("../../../book/src/alignlab.md")]
    mod alignlab {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/experiment.md")]
    mod experiment {}
}
