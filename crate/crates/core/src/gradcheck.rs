//! Central finite-difference verification of the analytic backward passes.
//!
//! Each trial draws a tiny random model and batch, computes the batch MSE
//! gradient analytically, and compares every entry with
//! `(L(θ+ε) − L(θ−ε)) / 2ε`. Error is `|analytic − numeric| / max(1, |analytic|)`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec::Execution;
use crate::models::{LstmParams, LstmSpec, MlpParams, MlpSpec, ModelKind, Regressor};
use crate::numerics::SeededRng;
use crate::preprocess::SequenceSample;
use crate::train::batch_gradient;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub model: ModelKind,
    pub trials: usize,
    pub entries_checked: usize,
    pub max_rel_error: f64,
    /// Trial, tensor name and index of the worst entry.
    pub worst: Option<(usize, String, usize)>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRAD_TOLERANCE
    }
}

fn batch_loss<R: Regressor>(model: &R, batch: &[&SequenceSample]) -> Result<f64> {
    let mut sse = 0.0;
    for s in batch {
        let d = model.predict(&s.window)? - s.target_rul;
        sse += d * d;
    }
    Ok(sse / batch.len() as f64)
}

/// Worst relative discrepancy over every parameter entry of one model/batch.
/// `fault` is added to the first analytic entry, for exercising the checker itself.
pub fn check_model<R: Regressor>(
    model: &R,
    batch: &[&SequenceSample],
    fault: Option<f64>,
) -> Result<(f64, String, usize, usize)> {
    let (mut analytic, _) = batch_gradient(model, batch, Execution::Sequential)?;
    if let Some(delta) = fault {
        if let Some((_, t)) = analytic.tensors_mut().into_iter().next() {
            t[0] += delta;
        }
    }
    let names: Vec<(String, usize)> = model.tensors().iter().map(|(n, t)| (n.clone(), t.len())).collect();
    let grads: Vec<Vec<f64>> = analytic.tensors().iter().map(|(_, t)| t.to_vec()).collect();

    let mut worst = (0.0, String::new(), 0usize);
    let mut count = 0;
    let mut probe = model.clone();
    for (ti, (name, len)) in names.iter().enumerate() {
        for k in 0..*len {
            let orig = model.tensors()[ti].1[k];
            probe.tensors_mut()[ti].1[k] = orig + FD_STEP;
            let plus = batch_loss(&probe, batch)?;
            probe.tensors_mut()[ti].1[k] = orig - FD_STEP;
            let minus = batch_loss(&probe, batch)?;
            probe.tensors_mut()[ti].1[k] = orig;

            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = grads[ti][k];
            let err = (a - numeric).abs() / a.abs().max(1.0);
            count += 1;
            if err > worst.0 || !err.is_finite() {
                worst = (err, name.clone(), k);
            }
        }
    }
    Ok((worst.0, worst.1, worst.2, count))
}

fn random_batch(rng: &mut SeededRng, window: usize, features: usize) -> Result<Vec<SequenceSample>> {
    let n = 1 + rng.below(3) as usize;
    (0..n)
        .map(|k| {
            Ok(SequenceSample {
                engine_id: 1,
                end_cycle: k as u32,
                window: rng.uniform_matrix(-1.0, 1.0, window, features)?,
                target_rul: rng.uniform(-2.0, 2.0)?,
            })
        })
        .collect()
}

/// Randomised small-model gradient check (F ≤ 5, H ≤ 4, window ≤ 5, batch ≤ 3).
pub fn gradient_check_suite(
    kind: ModelKind,
    trials: usize,
    seed: u64,
    fault: Option<f64>,
) -> Result<GradCheckReport> {
    let mut rng = SeededRng::new(seed);
    let mut report = GradCheckReport {
        model: kind,
        trials,
        entries_checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    for trial in 0..trials {
        let features = 1 + rng.below(5) as usize;
        let window = 1 + rng.below(5) as usize;
        let batch = random_batch(&mut rng, window, features)?;
        let refs: Vec<&SequenceSample> = batch.iter().collect();
        let (err, name, idx, n) = match kind {
            ModelKind::Lstm => {
                let spec = LstmSpec {
                    input_size: features,
                    hidden_size: 1 + rng.below(4) as usize,
                    window,
                };
                let mut p = LstmParams::init(&spec, &mut rng)?;
                for b in p.bias.iter_mut() {
                    *b += rng.uniform(-0.5, 0.5)?;
                }
                p.head_bias = rng.uniform(-1.0, 1.0)?;
                check_model(&p, &refs, fault)?
            }
            ModelKind::Mlp => {
                let depth = 1 + rng.below(2) as usize;
                let hidden = (0..depth).map(|_| 1 + rng.below(4) as usize).collect();
                let mut p = MlpParams::init(&MlpSpec::new(features, hidden), &mut rng)?;
                for layer in p.layers.iter_mut() {
                    for b in layer.bias.iter_mut() {
                        *b = rng.uniform(-0.3, 0.3)?;
                    }
                }
                check_model(&p, &refs, fault)?
            }
        };
        report.entries_checked += n;
        if err > report.max_rel_error || !err.is_finite() {
            report.max_rel_error = err;
            report.worst = Some((trial, name, idx));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DenseLayer;
    use crate::numerics::Matrix;

    #[test]
    fn small_suites_pass() {
        for kind in [ModelKind::Mlp, ModelKind::Lstm] {
            let r = gradient_check_suite(kind, 10, 1, None).unwrap();
            assert!(r.passed(), "{r:?}");
            assert!(r.entries_checked > 0);
        }
    }

    #[test]
    fn injected_fault_is_caught() {
        let r = gradient_check_suite(ModelKind::Lstm, 3, 1, Some(0.5)).unwrap();
        assert!(!r.passed(), "{r:?}");
    }

    #[test]
    fn dead_unit_has_zero_gradient_both_ways() {
        // Hidden unit 1 never activates, so its outgoing weight has no effect.
        let p = MlpParams {
            spec: MlpSpec::new(1, vec![2]),
            layers: vec![
                DenseLayer {
                    weight: Matrix::from_vec(2, 1, vec![1.0, 0.0]).unwrap(),
                    bias: vec![0.2, -5.0],
                },
                DenseLayer {
                    weight: Matrix::from_vec(1, 2, vec![0.7, 0.9]).unwrap(),
                    bias: vec![0.1],
                },
            ],
        };
        let s = SequenceSample {
            engine_id: 1,
            end_cycle: 1,
            window: Matrix::from_vec(1, 1, vec![0.4]).unwrap(),
            target_rul: 2.0,
        };
        let (g, _) = batch_gradient(&p, &[&s], Execution::Sequential).unwrap();
        assert_eq!(g.layers[1].weight.get(0, 1), 0.0);
        let (err, ..) = check_model(&p, &[&s], None).unwrap();
        assert!(err < FD_STEP * FD_STEP * 10.0 + 1e-9, "{err}");
    }
}
