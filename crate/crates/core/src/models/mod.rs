//! Hand-differentiated regressors.
//!
//! Both models consume a [`SequenceSample`](crate::preprocess::SequenceSample)
//! window: the LSTM unrolls over every row, the MLP only sees the final row.
//! A gradient set has the same type and shape as the parameter set it belongs to.

mod lstm;
mod mlp;

pub use lstm::{CellStep, LstmCache, LstmParams, LstmSpec, GATE_ORDER};
pub use mlp::{DenseLayer, MlpCache, MlpParams, MlpSpec};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Named flat views over every trainable tensor, in a fixed order.
pub trait ParamSet: Clone + Send + Sync {
    fn tensors(&self) -> Vec<(String, &[f64])>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += other`, tensor by tensor.
    fn add_assign(&mut self, other: &Self) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            for x in t.iter_mut() {
                *x *= s;
            }
        }
    }

    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

/// A regressor mapping one window to a scalar RUL estimate.
pub trait Regressor: ParamSet {
    fn predict(&self, window: &Matrix) -> Result<f64>;

    /// Prediction plus parameter gradients, where `dloss` maps the prediction
    /// to the upstream derivative dL/dŷ.
    fn predict_and_grad(&self, window: &Matrix, dloss: &dyn Fn(f64) -> f64) -> Result<(f64, Self)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Lstm,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Lstm => "lstm",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ModelKind::Mlp),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Fixed per-engine answers. Never produced by training; it exists so the
/// evaluation and reporting path can be checked against known outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    #[serde(with = "engine_pairs")]
    pub predictions: BTreeMap<u32, f64>,
}

/// `[[engine_id, rul], ...]`; integer map keys do not survive the tagged `Model` enum.
mod engine_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(map: &BTreeMap<u32, f64>, s: S) -> Result<S::Ok, S::Error> {
        map.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, f64>, D::Error> {
        Ok(Vec::<(u32, f64)>::deserialize(d)?.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Mlp(MlpParams),
    Lstm(LstmParams),
    Lookup(LookupTable),
}

impl Model {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Model::Mlp(_) => "mlp",
            Model::Lstm(_) => "lstm",
            Model::Lookup(_) => "lookup",
        }
    }

    /// RUL estimate for one engine's final window.
    pub fn predict_engine(&self, engine_id: u32, window: &Matrix) -> Result<f64> {
        match self {
            Model::Mlp(p) => p.predict(window),
            Model::Lstm(p) => p.predict(window),
            Model::Lookup(t) => t.predictions.get(&engine_id).copied().ok_or_else(|| {
                Error::Validation(format!("lookup table has no entry for engine {engine_id}"))
            }),
        }
    }
}

/// Mean squared error and its gradient w.r.t. each prediction.
pub fn mse_loss(predictions: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::Validation(format!(
            "mse over {} predictions and {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let n = predictions.len() as f64;
    let mut loss = 0.0;
    let grad = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}
