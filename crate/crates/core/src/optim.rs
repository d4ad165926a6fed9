//! Adam with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub name: String,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    pub moments: Vec<Moments>,
}

impl AdamState {
    pub fn new<P: ParamSet>(params: &P, config: AdamConfig) -> Self {
        let moments = params
            .tensors()
            .into_iter()
            .map(|(name, t)| Moments {
                name,
                m: vec![0.0; t.len()],
                v: vec![0.0; t.len()],
            })
            .collect();
        Self {
            config,
            step: 0,
            moments,
        }
    }

    /// One update. On a non-finite gradient nothing is modified.
    pub fn step<P: ParamSet>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let gts = grads.tensors();
        if gts.len() != self.moments.len() {
            return Err(Error::Validation(format!(
                "optimizer tracks {} tensors, gradient has {}",
                self.moments.len(),
                gts.len()
            )));
        }
        for ((name, g), mo) in gts.iter().zip(&self.moments) {
            if g.len() != mo.m.len() || *name != mo.name {
                return Err(Error::Validation(format!(
                    "gradient tensor `{name}` ({}) does not match optimizer slot `{}` ({})",
                    g.len(),
                    mo.name,
                    mo.m.len()
                )));
            }
            if let Some(index) = g.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    tensor: name.clone(),
                    index,
                });
            }
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (((_, theta), (_, g)), mo) in params
            .tensors_mut()
            .into_iter()
            .zip(gts)
            .zip(self.moments.iter_mut())
        {
            for k in 0..theta.len() {
                let gk = g[k];
                mo.m[k] = beta1 * mo.m[k] + (1.0 - beta1) * gk;
                mo.v[k] = beta2 * mo.v[k] + (1.0 - beta2) * gk * gk;
                let m_hat = mo.m[k] / bc1;
                let v_hat = mo.v[k] / bc2;
                theta[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` in place so its global L2 norm is at most `max_norm`.
pub fn clip_global_norm<P: ParamSet>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}
