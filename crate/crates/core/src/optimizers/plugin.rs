//! Parameter-update rules that consume a gradient estimate `g_x`.
//!
//! These mirror the three base optimizers the sampling framework is plugged
//! into. Their exact forms are this crate's interpretation:
//!
//! | rule           | buffers                                   | update                        |
//! |----------------|-------------------------------------------|-------------------------------|
//! | `SgdMomentum`  | `m ← βm + g`                              | `Δ = −γ m`                    |
//! | `Adamm`        | `m ← β₁m + (1−β₁)g`, `s ← β₂s + (1−β₂)g²` | `Δ = −γ m̂ / (√ŝ + floor)`     |
//! | `JaguarSign`   | `m ← βm + (1−β)g`                         | `Δ = −γ sign(m)`              |
//!
//! `m̂`, `ŝ` are the bias-corrected moments.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PluginRule {
    SgdMomentum { beta: f64 },
    Adamm { beta1: f64, beta2: f64, floor: f64 },
    JaguarSign { beta: f64 },
}

impl PluginRule {
    /// Plain `x ← x − γ g`.
    pub const PLAIN: PluginRule = PluginRule::SgdMomentum { beta: 0.0 };

    pub fn validate(&self) -> Result<()> {
        let in_unit = |name: &'static str, b: f64| {
            if (0.0..1.0).contains(&b) {
                Ok(())
            } else {
                Err(Error::OutOfRange { name, msg: format!("{b} not in [0, 1)") })
            }
        };
        match *self {
            PluginRule::SgdMomentum { beta } | PluginRule::JaguarSign { beta } => in_unit("beta", beta),
            PluginRule::Adamm { beta1, beta2, floor } => {
                in_unit("beta1", beta1)?;
                in_unit("beta2", beta2)?;
                if floor > 0.0 {
                    Ok(())
                } else {
                    Err(Error::NonPositive { name: "floor", value: floor })
                }
            }
        }
    }
}

/// Optimizer state owned by a plugin rule.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PluginBuffers {
    m: Vec<f64>,
    s: Vec<f64>,
}

impl PluginBuffers {
    pub fn zeros(dim: usize) -> Self {
        Self { m: vec![0.0; dim], s: vec![0.0; dim] }
    }

    pub fn momentum(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.s
    }

    /// Overrides the first-moment buffer; used to seed a state in tests.
    pub fn set_momentum(&mut self, m: Vec<f64>) {
        self.s.resize(m.len(), 0.0);
        self.m = m;
    }
}

/// Applies one update and returns `Δx`. `step` counts updates from 1 and
/// drives the bias correction of [`PluginRule::Adamm`].
pub fn apply_plugin(rule: &PluginRule, buffers: &mut PluginBuffers, g: &[f64], gamma: f64, step: u64) -> Result<Vec<f64>> {
    let dim = g.len();
    if buffers.m.len() != dim || buffers.s.len() != dim {
        return Err(Error::UninitializedBuffers { dim });
    }
    if step == 0 {
        return Err(Error::OutOfRange { name: "step", msg: "steps are counted from 1".into() });
    }
    let delta = match *rule {
        PluginRule::SgdMomentum { beta } => {
            for (m, gi) in buffers.m.iter_mut().zip(g) {
                *m = beta * *m + gi;
            }
            buffers.m.iter().map(|m| -gamma * m).collect()
        }
        PluginRule::Adamm { beta1, beta2, floor } => {
            let c1 = 1.0 - beta1.powf(step as f64);
            let c2 = 1.0 - beta2.powf(step as f64);
            buffers
                .m
                .iter_mut()
                .zip(buffers.s.iter_mut())
                .zip(g)
                .map(|((m, s), gi)| {
                    *m = beta1 * *m + (1.0 - beta1) * gi;
                    *s = beta2 * *s + (1.0 - beta2) * gi * gi;
                    let m_hat = *m / c1;
                    let s_hat = *s / c2;
                    -gamma * m_hat / (s_hat.sqrt() + floor)
                })
                .collect()
        }
        PluginRule::JaguarSign { beta } => buffers
            .m
            .iter_mut()
            .zip(g)
            .map(|(m, gi)| {
                *m = beta * *m + (1.0 - beta) * gi;
                // sign(0) = 0: no movement along coordinates with no signal
                if *m == 0.0 {
                    0.0
                } else {
                    -gamma * m.signum()
                }
            })
            .collect(),
    };
    Ok(delta)
}
