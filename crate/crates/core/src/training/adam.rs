//! Adam with bias correction, plus the optional global-norm gradient
//! clip.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::Parameters;

#[derive(Debug, Clone)]
pub struct OptimState {
    /// First/second moment per parameter path.
    pub m: BTreeMap<String, Vec<f64>>,
    pub v: BTreeMap<String, Vec<f64>>,
    pub step: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimState {
    pub fn new(params: &Parameters, lr: f64, beta1: f64, beta2: f64, eps: f64) -> OptimState {
        let m = params
            .iter()
            .map(|(p, t)| (p.clone(), vec![0.0; t.numel()]))
            .collect();
        let v = params
            .iter()
            .map(|(p, t)| (p.clone(), vec![0.0; t.numel()]))
            .collect();
        OptimState {
            m,
            v,
            step: 0,
            lr,
            beta1,
            beta2,
            eps,
        }
    }
}

/// One bias-corrected Adam update over every parameter. Gradients are
/// cleared afterwards; a missing gradient on any trainable parameter
/// is an error.
pub fn adam_step(params: &Parameters, state: &mut OptimState) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (path, tensor) in params.iter() {
        let grad = tensor.grad().ok_or_else(|| {
            Error::Graph(format!("adam_step: no gradient for parameter `{path}`"))
        })?;
        let m = state
            .m
            .get_mut(path)
            .ok_or_else(|| Error::invalid(format!("adam_step: no moment slot for `{path}`")))?;
        let v = state
            .v
            .get_mut(path)
            .ok_or_else(|| Error::invalid(format!("adam_step: no moment slot for `{path}`")))?;
        let mut data = tensor.data_mut();
        for i in 0..data.len() {
            let g = grad[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            data[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
        drop(data);
        tensor.clear_grad();
    }
    Ok(())
}

/// Scale all gradients so their global L2 norm does not exceed
/// `max_norm`. Returns the pre-clip norm.
pub fn clip_global_norm(params: &Parameters, max_norm: f64) -> Result<f64> {
    let mut total = 0.0;
    for (path, tensor) in params.iter() {
        let grad = tensor.grad().ok_or_else(|| {
            Error::Graph(format!("clip_global_norm: no gradient for `{path}`"))
        })?;
        total += grad.iter().map(|g| g * g).sum::<f64>();
    }
    let norm = total.sqrt();
    if norm > max_norm && norm > 0.0 {
        let factor = max_norm / norm;
        for (_, tensor) in params.iter() {
            let scaled: Vec<f64> = tensor
                .grad()
                .expect("checked above")
                .iter()
                .map(|g| g * factor)
                .collect();
            tensor.clear_grad();
            tensor.accumulate_grad(&scaled);
        }
    }
    Ok(norm)
}
