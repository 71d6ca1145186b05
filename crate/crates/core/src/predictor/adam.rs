//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use super::network::{Layers, PredictorModel};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
    /// Coefficient of the squared-weight penalty; applied by the loss, not
    /// by the update rule.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps_hat > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid optimizer settings {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Layers,
    pub v: Layers,
    pub step: u64,
}

impl AdamState {
    pub fn new(model: &PredictorModel, config: AdamConfig) -> Self {
        AdamState {
            config,
            m: model.layers.zeros_like(),
            v: model.layers.zeros_like(),
            step: 0,
        }
    }
}

pub fn adam_step(model: &mut PredictorModel, grads: &Layers, state: &mut AdamState) -> Result<()> {
    if !model.layers.same_shape(grads) || !model.layers.same_shape(&state.m) {
        return Err(Error::ShapeMismatch(
            "gradient or moment shapes differ from the model".into(),
        ));
    }
    state.step += 1;
    let c = &state.config;
    let t = state.step as i32;
    let correct1 = 1.0 - c.beta1.powi(t);
    let correct2 = 1.0 - c.beta2.powi(t);
    let params = model.layers.slices_mut();
    let g = grads.slices();
    let m = state.m.slices_mut();
    let v = state.v.slices_mut();
    for ((((p, _), (g, _)), (m, _)), (v, _)) in params.into_iter().zip(g).zip(m).zip(v) {
        for i in 0..p.len() {
            m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
            v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
            let m_hat = m[i] / correct1;
            let v_hat = v[i] / correct2;
            p[i] -= c.lr * m_hat / (v_hat.sqrt() + c.eps_hat);
        }
    }
    Ok(())
}
