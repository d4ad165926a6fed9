//! Single-layer LSTM with a linear regression head on the last hidden state.
//!
//! Gate pre-activations are stacked in blocks of `H` rows in the order
//! input, forget, cell, output:
//!
//! ```text
//! z = W·x_t + U·h_{t-1} + b
//! i = σ(z_i)  f = σ(z_f)  g = tanh(z_g)  o = σ(z_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ŷ   = head · h_T + head_bias
//! ```
//!
//! State starts at zero for every window.

use serde::{Deserialize, Serialize};

use super::{ParamSet, Regressor};
use crate::error::{Error, Result};
use crate::numerics::{sigmoid, Matrix, SeededRng};

pub const GATE_ORDER: [&str; 4] = ["i", "f", "g", "o"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub input_size: usize,
    pub hidden_size: usize,
    /// Timesteps per input window.
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub spec: LstmSpec,
    /// `4H × F`
    pub w_input: Matrix,
    /// `4H × H`
    pub w_recurrent: Matrix,
    /// `4H`
    pub bias: Vec<f64>,
    /// `H`
    pub head_weight: Vec<f64>,
    pub head_bias: f64,
}

/// Activations of one cell step.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStep {
    /// Post-activation gates, `4H`, in [`GATE_ORDER`].
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    /// `hs[0] = 0`, `hs[t+1]` is the hidden state after step `t`.
    pub hs: Vec<Vec<f64>>,
    pub cs: Vec<Vec<f64>>,
    pub steps: Vec<CellStep>,
    pub inputs: Matrix,
}

impl LstmParams {
    /// Weights ~ U(−1/√fan_in, 1/√fan_in) with fan_in = F for `W`, H for `U`
    /// and the head; biases zero except the forget block, which is 1.
    pub fn init(spec: &LstmSpec, rng: &mut SeededRng) -> Result<Self> {
        if spec.input_size == 0 || spec.hidden_size == 0 || spec.window == 0 {
            return Err(Error::Config(format!("LSTM sizes must be positive: {spec:?}")));
        }
        let (f, h) = (spec.input_size, spec.hidden_size);
        let bi = 1.0 / (f as f64).sqrt();
        let bh = 1.0 / (h as f64).sqrt();
        let w_input = rng.uniform_matrix(-bi, bi, 4 * h, f)?;
        let w_recurrent = rng.uniform_matrix(-bh, bh, 4 * h, h)?;
        let head = rng.uniform_matrix(-bh, bh, 1, h)?;
        let mut bias = vec![0.0; 4 * h];
        bias[h..2 * h].fill(1.0);
        Ok(Self {
            spec: spec.clone(),
            w_input,
            w_recurrent,
            bias,
            head_weight: head.into_vec(),
            head_bias: 0.0,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.spec.hidden_size
    }

    pub fn cell_forward(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<CellStep> {
        let h = self.spec.hidden_size;
        if x.len() != self.spec.input_size || h_prev.len() != h || c_prev.len() != h {
            return Err(Error::Shape {
                op: "lstm_cell_forward",
                left: (x.len(), h_prev.len()),
                right: (self.spec.input_size, h),
            });
        }
        let mut z = self.bias.clone();
        self.w_input.matvec_acc(x, &mut z);
        self.w_recurrent.matvec_acc(h_prev, &mut z);
        for (k, v) in z.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&k) {
                v.tanh()
            } else {
                sigmoid(*v)
            };
        }
        let mut c = vec![0.0; h];
        let mut tanh_c = vec![0.0; h];
        let mut h_out = vec![0.0; h];
        for j in 0..h {
            let (i, f, g, o) = (z[j], z[h + j], z[2 * h + j], z[3 * h + j]);
            c[j] = f * c_prev[j] + i * g;
            tanh_c[j] = c[j].tanh();
            h_out[j] = o * tanh_c[j];
        }
        Ok(CellStep {
            gates: z,
            c,
            tanh_c,
            h: h_out,
        })
    }

    pub fn sequence_forward(&self, window: &Matrix) -> Result<(f64, LstmCache)> {
        if window.rows() != self.spec.window || window.cols() != self.spec.input_size {
            return Err(Error::Shape {
                op: "lstm_sequence_forward",
                left: window.shape(),
                right: (self.spec.window, self.spec.input_size),
            });
        }
        let h = self.spec.hidden_size;
        let mut hs = Vec::with_capacity(window.rows() + 1);
        let mut cs = Vec::with_capacity(window.rows() + 1);
        let mut steps = Vec::with_capacity(window.rows());
        hs.push(vec![0.0; h]);
        cs.push(vec![0.0; h]);
        for t in 0..window.rows() {
            let step = self.cell_forward(window.row(t), &hs[t], &cs[t])?;
            hs.push(step.h.clone());
            cs.push(step.c.clone());
            steps.push(step);
        }
        let last = &hs[window.rows()];
        let y = self.head_bias + crate::numerics::dot(&self.head_weight, last);
        Ok((
            y,
            LstmCache {
                hs,
                cs,
                steps,
                inputs: window.clone(),
            },
        ))
    }

    /// Full backpropagation through time from `dloss/dŷ`.
    pub fn backward(&self, cache: &LstmCache, dloss_dpred: f64) -> Result<LstmParams> {
        let h = self.spec.hidden_size;
        let steps = cache.steps.len();
        if steps == 0
            || cache.hs.len() != steps + 1
            || cache.inputs.rows() != steps
            || cache.hs[0].len() != h
            || cache.inputs.cols() != self.spec.input_size
        {
            return Err(Error::Validation("LSTM cache does not match parameters".into()));
        }
        let mut g = self.zeros_like();
        g.head_bias = dloss_dpred;
        for (gw, hv) in g.head_weight.iter_mut().zip(&cache.hs[steps]) {
            *gw = dloss_dpred * hv;
        }

        let mut dh: Vec<f64> = self.head_weight.iter().map(|w| w * dloss_dpred).collect();
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for t in (0..steps).rev() {
            let st = &cache.steps[t];
            let c_prev = &cache.cs[t];
            for j in 0..h {
                let (i, f, gg, o) = (st.gates[j], st.gates[h + j], st.gates[2 * h + j], st.gates[3 * h + j]);
                let tc = st.tanh_c[j];
                let d_o = dh[j] * tc;
                let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
                let d_f = dc * c_prev[j];
                let d_i = dc * gg;
                let d_g = dc * i;
                dc_next[j] = dc * f;
                dz[j] = d_i * i * (1.0 - i);
                dz[h + j] = d_f * f * (1.0 - f);
                dz[2 * h + j] = d_g * (1.0 - gg * gg);
                dz[3 * h + j] = d_o * o * (1.0 - o);
            }
            g.w_input.add_outer(&dz, cache.inputs.row(t));
            g.w_recurrent.add_outer(&dz, &cache.hs[t]);
            for (b, d) in g.bias.iter_mut().zip(&dz) {
                *b += d;
            }
            dh.fill(0.0);
            self.w_recurrent.matvec_t_acc(&dz, &mut dh);
        }
        Ok(g)
    }
}

impl ParamSet for LstmParams {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        vec![
            ("w_input".into(), self.w_input.data()),
            ("w_recurrent".into(), self.w_recurrent.data()),
            ("bias".into(), self.bias.as_slice()),
            ("head_weight".into(), self.head_weight.as_slice()),
            ("head_bias".into(), std::slice::from_ref(&self.head_bias)),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![
            ("w_input".into(), self.w_input.data_mut()),
            ("w_recurrent".into(), self.w_recurrent.data_mut()),
            ("bias".into(), self.bias.as_mut_slice()),
            ("head_weight".into(), self.head_weight.as_mut_slice()),
            ("head_bias".into(), std::slice::from_mut(&mut self.head_bias)),
        ]
    }
}

impl Regressor for LstmParams {
    fn predict(&self, window: &Matrix) -> Result<f64> {
        Ok(self.sequence_forward(window)?.0)
    }

    fn predict_and_grad(&self, window: &Matrix, dloss: &dyn Fn(f64) -> f64) -> Result<(f64, Self)> {
        let (y, cache) = self.sequence_forward(window)?;
        Ok((y, self.backward(&cache, dloss(y))?))
    }
}
