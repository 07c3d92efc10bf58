//! First-order optimizer with bias-corrected moment estimates.

use crate::error::{Error, Result};

/// Optimizer hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning_rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {beta}")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "epsilon must be finite and > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// Running optimizer state, matched 1:1 to a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub params: AdamParams,
}

impl OptimizerState {
    pub fn new(param_count: usize, params: AdamParams) -> Self {
        OptimizerState {
            step_count: 0,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            params,
        }
    }
}

/// One optimizer step over a flat parameter vector.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut OptimizerState) -> Result<()> {
    let n = params.len();
    if grads.len() != n {
        return Err(Error::State(format!(
            "gradient length {} does not match {} parameters",
            grads.len(),
            n
        )));
    }
    if state.first_moment.len() != n || state.second_moment.len() != n {
        return Err(Error::State(format!(
            "moment arrays sized {}/{} do not match {} parameters",
            state.first_moment.len(),
            state.second_moment.len(),
            n
        )));
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let h = state.params;
    let bias1 = 1.0 - h.beta1.powi(t);
    let bias2 = 1.0 - h.beta2.powi(t);

    for i in 0..n {
        let g = grads[i];
        let m = h.beta1 * state.first_moment[i] + (1.0 - h.beta1) * g;
        let v = h.beta2 * state.second_moment[i] + (1.0 - h.beta2) * g * g;
        state.first_moment[i] = m;
        state.second_moment[i] = v;
        let m_hat = m / bias1;
        let v_hat = v / bias2;
        params[i] -= h.learning_rate * m_hat / (v_hat.sqrt() + h.epsilon);
    }

    if let Some(p) = params.iter().find(|p| !p.is_finite()) {
        return Err(Error::State(format!(
            "parameter became non-finite ({p}) after optimizer step {}",
            state.step_count
        )));
    }
    Ok(())
}
