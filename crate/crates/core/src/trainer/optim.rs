//! Bias-corrected Adam over every parameter tensor.

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParameters};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamHyper {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        AdamHyper {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParameters) -> Self {
        let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Self::for_lengths(&lens)
    }

    pub fn for_lengths(lens: &[usize]) -> Self {
        AdamState {
            step: 0,
            first: lens.iter().map(|&n| vec![0.0; n]).collect(),
            second: lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// Applies one Adam update to a single tensor. `step` is the 1-based step
/// number used for bias correction.
pub fn adam_update(param: &mut [f64], grad: &[f64], first: &mut [f64], second: &mut [f64], step: u64, hyper: &AdamHyper) {
    let AdamHyper {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = *hyper;
    let correction1 = 1.0 - beta1.powf(step as f64);
    let correction2 = 1.0 - beta2.powf(step as f64);
    for i in 0..param.len() {
        let g = grad[i];
        first[i] = beta1 * first[i] + (1.0 - beta1) * g;
        second[i] = beta2 * second[i] + (1.0 - beta2) * g * g;
        let m_hat = first[i] / correction1;
        let v_hat = second[i] / correction2;
        param[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
    }
}

pub fn adam_step(params: &mut ModelParameters, grads: &Gradients, state: &mut AdamState, hyper: &AdamHyper) -> Result<()> {
    let grad_tensors = grads.tensors();
    let mut param_tensors = params.tensors_mut();
    if grad_tensors.len() != param_tensors.len()
        || state.first.len() != param_tensors.len()
        || param_tensors
            .iter()
            .zip(&grad_tensors)
            .zip(&state.first)
            .any(|((p, g), m)| p.len() != g.len() || p.len() != m.len())
    {
        return Err(Error::Internal("optimizer state does not match parameter shapes".into()));
    }
    if let Some(bad) = grad_tensors.iter().position(|t| t.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite(format!("gradient tensor {bad}")));
    }
    state.step += 1;
    for (i, (p, g)) in param_tensors.iter_mut().zip(&grad_tensors).enumerate() {
        adam_update(p, g, &mut state.first[i], &mut state.second[i], state.step, hyper);
    }
    Ok(())
}
