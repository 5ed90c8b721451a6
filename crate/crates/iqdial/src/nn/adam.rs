//! Bias-corrected Adam.

use indexmap::IndexMap;

use super::tensor::ParameterSet;
use super::NnError;

#[derive(Clone, Debug)]
pub struct AdamState {
    m: IndexMap<String, Vec<f64>>,
    v: IndexMap<String, Vec<f64>>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &ParameterSet, lr: f64) -> Self {
        let mut m = IndexMap::new();
        let mut v = IndexMap::new();
        for (name, t) in params.iter() {
            m.insert(name.clone(), vec![0.0; t.numel()]);
            v.insert(name.clone(), vec![0.0; t.numel()]);
        }
        AdamState { m, v, step: 0, lr, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// One Adam update from the gradients stored in `params`. Gradients are
/// left untouched; callers zero them between steps.
pub fn adam_step(params: &mut ParameterSet, state: &mut AdamState) -> Result<(), NnError> {
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    for (name, tensor) in params.iter_mut() {
        let Some(grad) = tensor.grad.as_ref() else { continue };
        let m = state.m.get_mut(name).ok_or_else(|| NnError::MissingParam { name: name.clone() })?;
        let v = state.v.get_mut(name).ok_or_else(|| NnError::MissingParam { name: name.clone() })?;
        if m.len() != grad.len() {
            return Err(NnError::BadShape {
                what: format!("adam moment length {} vs grad {} for {name}", m.len(), grad.len()),
            });
        }
        let grad = grad.clone();
        let data = tensor.data_mut();
        for i in 0..grad.len() {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grad[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            data[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
        }
    }
    Ok(())
}
