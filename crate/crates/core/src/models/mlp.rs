use serde::{Deserialize, Serialize};

use super::{ParamSet, Regressor};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_size: usize,
    /// ReLU hidden layer widths; the output layer is a single linear unit.
    pub hidden: Vec<usize>,
}

impl MlpSpec {
    pub fn new(input_size: usize, hidden: Vec<usize>) -> Self {
        Self { input_size, hidden }
    }

    fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_size];
        s.extend(&self.hidden);
        s.push(1);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out × in`
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub spec: MlpSpec,
    pub layers: Vec<DenseLayer>,
}

/// Layer inputs and pre-activations from one forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `inputs[l]` is what layer `l` consumed.
    pub inputs: Vec<Vec<f64>>,
    /// `pre[l]` is layer `l`'s affine output before its activation.
    pub pre: Vec<Vec<f64>>,
}

impl MlpParams {
    /// Weights ~ U(−1/√fan_in, 1/√fan_in), biases zero.
    pub fn init(spec: &MlpSpec, rng: &mut SeededRng) -> Result<Self> {
        let sizes = spec.sizes();
        if sizes.contains(&0) {
            return Err(Error::Config(format!("layer sizes must be positive: {sizes:?}")));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            layers.push(DenseLayer {
                weight: rng.uniform_matrix(-bound, bound, fan_out, fan_in)?,
                bias: vec![0.0; fan_out],
            });
        }
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn input_size(&self) -> usize {
        self.spec.input_size
    }

    pub fn forward(&self, x: &[f64]) -> Result<(f64, MlpCache)> {
        if x.len() != self.spec.input_size {
            return Err(Error::Shape {
                op: "mlp_forward",
                left: (1, x.len()),
                right: (1, self.spec.input_size),
            });
        }
        let n = self.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut a = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.clone();
            layer.weight.matvec_acc(&a, &mut z);
            let next = if l + 1 < n {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(z);
        }
        Ok((a[0], MlpCache { inputs, pre }))
    }

    /// Row-wise forward over a `batch × F` matrix using matrix products.
    pub fn forward_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
        let mut a = xs.clone();
        let n = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.matmul(&layer.weight.transpose())?;
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                    if l + 1 < n {
                        *v = v.max(0.0);
                    }
                }
            }
            a = z;
        }
        Ok(a.into_vec())
    }

    pub fn backward(&self, cache: &MlpCache, dloss_dpred: f64) -> Result<MlpParams> {
        if cache.inputs.len() != self.layers.len() || cache.pre.len() != self.layers.len() {
            return Err(Error::Validation(format!(
                "cache has {} layers, model has {}",
                cache.inputs.len(),
                self.layers.len()
            )));
        }
        let mut grads = self.zeros_like();
        let mut delta = vec![dloss_dpred];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            g.weight.add_outer(&delta, &cache.inputs[l]);
            for (gb, d) in g.bias.iter_mut().zip(&delta) {
                *gb += d;
            }
            if l > 0 {
                let mut back = vec![0.0; layer.weight.cols()];
                layer.weight.matvec_t_acc(&delta, &mut back);
                for (b, z) in back.iter_mut().zip(&cache.pre[l - 1]) {
                    if *z <= 0.0 {
                        *b = 0.0;
                    }
                }
                delta = back;
            }
        }
        Ok(grads)
    }
}

impl ParamSet for MlpParams {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut v = Vec::with_capacity(2 * self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            v.push((format!("layers.{l}.weight"), layer.weight.data()));
            v.push((format!("layers.{l}.bias"), layer.bias.as_slice()));
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut v = Vec::with_capacity(2 * self.layers.len());
        for (l, layer) in self.layers.iter_mut().enumerate() {
            v.push((format!("layers.{l}.weight"), layer.weight.data_mut()));
            v.push((format!("layers.{l}.bias"), layer.bias.as_mut_slice()));
        }
        v
    }
}

fn last_row(window: &Matrix) -> Result<&[f64]> {
    if window.rows() == 0 {
        return Err(Error::Validation("empty input window".into()));
    }
    Ok(window.row(window.rows() - 1))
}

impl Regressor for MlpParams {
    fn predict(&self, window: &Matrix) -> Result<f64> {
        Ok(self.forward(last_row(window)?)?.0)
    }

    fn predict_and_grad(&self, window: &Matrix, dloss: &dyn Fn(f64) -> f64) -> Result<(f64, Self)> {
        let (y, cache) = self.forward(last_row(window)?)?;
        Ok((y, self.backward(&cache, dloss(y))?))
    }
}
