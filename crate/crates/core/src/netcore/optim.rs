use serde::{Deserialize, Serialize};

use super::params::{GradientStore, ParameterStore};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    RmsProp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// RMSProp squared-gradient decay.
    pub decay: f64,
    pub epsilon: f64,
    /// Global L2 norm clip; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::RmsProp,
            learning_rate: 5e-4,
            decay: 0.99,
            epsilon: 1e-5,
            max_grad_norm: Some(10.0),
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self { kind: OptimizerKind::Sgd, learning_rate, max_grad_norm: None, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    square_avg: Vec<f64>,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self { square_avg: vec![0.0; len] }
    }
}

/// One optimizer step. Rejects non-finite gradients without touching `params`.
pub fn apply_update(
    params: &mut ParameterStore,
    grads: &GradientStore,
    state: &mut OptimizerState,
    config: &OptimizerConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.square_avg.len() != params.len() {
        return Err(Error::usage("optimizer shapes do not match the parameter store"));
    }
    if let Some((i, v)) = grads.values().iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Training(format!(
            "non-finite gradient {v} at parameter index {i} (norm {})",
            grads.norm()
        )));
    }
    let scale = match config.max_grad_norm {
        Some(max) => {
            let norm = grads.norm();
            if norm > max {
                max / norm
            } else {
                1.0
            }
        }
        None => 1.0,
    };
    let lr = config.learning_rate;
    match config.kind {
        OptimizerKind::Sgd => {
            for (p, &g) in params.values_mut().iter_mut().zip(grads.values()) {
                *p -= lr * (g * scale);
            }
        }
        OptimizerKind::RmsProp => {
            let (a, eps) = (config.decay, config.epsilon);
            for ((p, &g), v) in
                params.values_mut().iter_mut().zip(grads.values()).zip(&mut state.square_avg)
            {
                let g = g * scale;
                *v = a * *v + (1.0 - a) * g * g;
                *p -= lr * g / (v.sqrt() + eps);
            }
        }
    }
    if !params.is_finite() {
        return Err(Error::Training("parameters became non-finite after update".into()));
    }
    Ok(())
}

/// Scales all stores so their joint L2 norm is at most `max`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut GradientStore], max: f64) -> f64 {
    let norm = grads.iter().map(|g| g.values().iter().map(|v| v * v).sum::<f64>()).sum::<f64>().sqrt();
    if norm > max {
        let s = max / norm;
        for g in grads.iter_mut() {
            g.scale(s);
        }
    }
    norm
}
