use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        }
    }
}

/// Moment buffers for a fixed list of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    /// L2 penalty per parameter, added to the gradient before the moments.
    pub weight_decay: Vec<f64>,
    pub first_moment: Vec<Matrix>,
    pub second_moment: Vec<Matrix>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &[Matrix], config: AdamConfig) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect()
        };
        Self {
            config,
            weight_decay: vec![0.0; params.len()],
            first_moment: zeros(),
            second_moment: zeros(),
            step: 0,
        }
    }

    pub fn with_weight_decay(mut self, weight_decay: Vec<f64>) -> Self {
        self.weight_decay = weight_decay;
        self
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(params: &mut [Matrix], grads: &[Matrix], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len()
        || params.len() != state.first_moment.len()
        || params.len() != state.weight_decay.len()
    {
        return Err(Error::input(
            "Adam parameter, gradient and state counts differ",
        ));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Shape {
                op: "adam_step",
                lhs: p.shape(),
                rhs: g.shape(),
            });
        }
    }
    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        eps_hat,
    } = state.config;
    let t = state.step as i32;
    let bias1 = 1.0 - beta1.powi(t);
    let bias2 = 1.0 - beta2.powi(t);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let wd = state.weight_decay[k];
        let m = state.first_moment[k].data_mut();
        let v = state.second_moment[k].data_mut();
        for (((w, &gr), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            let gr = gr + wd * *w;
            *mi = beta1 * *mi + (1.0 - beta1) * gr;
            *vi = beta2 * *vi + (1.0 - beta2) * gr * gr;
            let m_hat = *mi / bias1;
            let v_hat = *vi / bias2;
            *w -= learning_rate * m_hat / (v_hat.sqrt() + eps_hat);
        }
    }
    Ok(())
}
