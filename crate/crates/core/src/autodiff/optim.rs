use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamWConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self::new(1e-3, 5e-4)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    step: u64,
    first: BTreeMap<String, Matrix>,
    second: BTreeMap<String, Matrix>,
}

impl OptimizerState {
    pub fn new(config: AdamWConfig) -> Self {
        Self {
            config,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, name: &str) -> Option<&Matrix> {
        self.first.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Matrix> {
        self.second.get(name)
    }
}

/// One AdamW step with decoupled weight decay. `grads` must name exactly the
/// tensors of `params`, with matching shapes.
pub fn adamw_step(params: &mut ParamSet, grads: &BTreeMap<String, Matrix>, state: &mut OptimizerState) -> Result<()> {
    if grads.len() != params.len() || !params.names().all(|n| grads.contains_key(n)) {
        return Err(Error::contract("gradient names do not match parameter names"));
    }
    for (name, g) in grads {
        let p = params.get(name).expect("checked above");
        if p.shape() != g.shape() {
            return Err(Error::contract(format!(
                "gradient for `{name}` has shape {:?}, parameter has {:?}",
                g.shape(),
                p.shape()
            )));
        }
        if !g.is_finite() {
            return Err(Error::numeric(format!("non-finite gradient for `{name}`")));
        }
    }
    let c = state.config;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - c.beta1.powi(t);
    let bc2 = 1.0 - c.beta2.powi(t);
    let decay = 1.0 - c.lr * c.weight_decay;
    for (name, g) in grads {
        let p = params.get_mut(name).expect("checked above");
        let m = state
            .first
            .entry(name.clone())
            .or_insert_with(|| Matrix::zeros(g.rows(), g.cols()));
        let v = state
            .second
            .entry(name.clone())
            .or_insert_with(|| Matrix::zeros(g.rows(), g.cols()));
        for (((pk, &gk), mk), vk) in p
            .as_mut_slice()
            .iter_mut()
            .zip(g.as_slice())
            .zip(m.as_mut_slice())
            .zip(v.as_mut_slice())
        {
            *pk *= decay;
            *mk = c.beta1 * *mk + (1.0 - c.beta1) * gk;
            *vk = c.beta2 * *vk + (1.0 - c.beta2) * gk * gk;
            let m_hat = *mk / bc1;
            let v_hat = *vk / bc2;
            *pk -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
        }
    }
    Ok(())
}
