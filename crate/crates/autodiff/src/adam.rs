use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

/// Adam optimizer state with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh state sized for `params`, with beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(params: &[Tensor], learning_rate: f64) -> Self {
        Self::with_lengths(params.iter().map(Tensor::len), learning_rate)
    }

    pub fn with_lengths(lengths: impl IntoIterator<Item = usize>, learning_rate: f64) -> Self {
        let m: Vec<Vec<f64>> = lengths.into_iter().map(|n| vec![0.0; n]).collect();
        let v = m.clone();
        Self {
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m,
            v,
        }
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }
}

/// One Adam update using the gradients stored on `params`; gradients are
/// zeroed afterwards.
pub fn adam_step(params: &mut [Tensor], state: &mut AdamState) -> Result<()> {
    if params.len() != state.m.len()
        || params.iter().zip(&state.m).any(|(p, m)| p.len() != m.len())
    {
        return Err(AutodiffError::StateMismatch(format!(
            "{} parameter tensors vs {} moment buffers",
            params.len(),
            state.m.len()
        )));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;

    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let grad = p.grad().to_vec();
        let values = p.values_mut();
        for i in 0..values.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(AutodiffError::NonFinite {
                context: "adam update".into(),
            });
        }
        p.zero_grad();
    }
    Ok(())
}
