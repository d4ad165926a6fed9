//! Mini-batch training loop and test-set evaluation.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{EngineTrajectory, RulLabelFile};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::models::{LstmParams, LstmSpec, MlpParams, MlpSpec, Model, ModelKind, Regressor};
use crate::numerics::SeededRng;
use crate::optim::{clip_global_norm, AdamConfig, AdamState};
use crate::preprocess::{
    prepare_inference, FeatureSelection, PreprocessConfig, ScalerParams, SequenceSample,
    DEFAULT_DROPPED_SENSORS,
};

pub const RNG_STREAM_INIT: u64 = 1;
pub const RNG_STREAM_SHUFFLE: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub window: usize,
    pub seed: u64,
    pub alpha: f64,
    pub rul_cap: Option<f64>,
    pub grad_clip: Option<f64>,
    pub trim: usize,
    pub n_val: usize,
    pub lstm_hidden: usize,
    pub mlp_hidden: Vec<usize>,
    pub dropped_sensors: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Lstm,
            epochs: 35,
            batch_size: 64,
            lr: 0.001,
            window: 20,
            seed: 42,
            alpha: 0.1,
            rul_cap: None,
            grad_clip: None,
            trim: 10,
            n_val: 20,
            lstm_hidden: 64,
            mlp_hidden: vec![64, 32],
            dropped_sensors: DEFAULT_DROPPED_SENSORS.to_vec(),
        }
    }
}

impl TrainConfig {
    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            alpha: self.alpha,
            trim: self.trim,
            window: self.window,
            rul_cap: self.rul_cap,
            n_val: self.n_val,
            seed: self.seed,
            dropped_sensors: self.dropped_sensors.clone(),
            drop_constant_settings: true,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if self.lstm_hidden == 0 || self.mlp_hidden.contains(&0) {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::Config(format!("grad_clip must be positive, got {c}")));
            }
        }
        self.preprocess().validate()
    }

    /// A freshly initialised model for `input_size` features.
    pub fn init_model(&self, input_size: usize) -> Result<Model> {
        let mut rng = SeededRng::with_stream(self.seed, RNG_STREAM_INIT);
        Ok(match self.model {
            ModelKind::Mlp => Model::Mlp(MlpParams::init(
                &MlpSpec::new(input_size, self.mlp_hidden.clone()),
                &mut rng,
            )?),
            ModelKind::Lstm => Model::Lstm(LstmParams::init(
                &LstmSpec {
                    input_size,
                    hidden_size: self.lstm_hidden,
                    window: self.window,
                },
                &mut rng,
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean squared error over the epoch's mini-batches, before each update.
    pub train_mse: f64,
    /// Full validation pass after the epoch; `None` with no validation engines.
    pub val_mse: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub optimizer: AdamState,
    pub history: TrainHistory,
    /// Every engine that contributed a sample to some gradient step.
    pub gradient_engine_ids: BTreeSet<u32>,
}

fn engine_ids(samples: &[SequenceSample]) -> BTreeSet<u32> {
    samples.iter().map(|s| s.engine_id).collect()
}

pub fn mean_squared_error<R: Regressor>(
    model: &R,
    samples: &[SequenceSample],
    exec: Execution,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Validation("no samples to score".into()));
    }
    let preds = exec.map(samples, |s| model.predict(&s.window));
    let mut sse = 0.0;
    for (p, s) in preds.into_iter().zip(samples) {
        let d = p? - s.target_rul;
        sse += d * d;
    }
    Ok(sse / samples.len() as f64)
}

/// Sum of per-sample gradients for one batch plus the batch's sum of squared errors.
///
/// Per-sample results are folded in batch order, so the sum is identical for
/// every [`Execution`] mode.
pub fn batch_gradient<R: Regressor>(
    model: &R,
    batch: &[&SequenceSample],
    exec: Execution,
) -> Result<(R, f64)> {
    let m = batch.len() as f64;
    let per_sample = exec.map(batch, |s| {
        let target = s.target_rul;
        model.predict_and_grad(&s.window, &|y| 2.0 * (y - target) / m)
    });
    let mut acc: Option<R> = None;
    let mut sse = 0.0;
    for (res, s) in per_sample.into_iter().zip(batch) {
        let (y, g) = res?;
        let d = y - s.target_rul;
        sse += d * d;
        match acc.as_mut() {
            Some(a) => a.add_assign(&g),
            None => acc = Some(g),
        }
    }
    let acc = acc.ok_or_else(|| Error::Validation("empty batch".into()))?;
    Ok((acc, sse))
}

struct Fit<R> {
    params: R,
    optimizer: AdamState,
    history: TrainHistory,
    gradient_engine_ids: BTreeSet<u32>,
}

fn fit<R: Regressor>(
    mut params: R,
    config: &TrainConfig,
    train: &[SequenceSample],
    val: &[SequenceSample],
    exec: Execution,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<Fit<R>> {
    let mut optimizer = AdamState::new(&params, config.adam());
    let mut shuffle = SeededRng::with_stream(config.seed, RNG_STREAM_SHUFFLE);
    let mut history = TrainHistory::default();
    let mut used = BTreeSet::new();

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        let order = shuffle.permutation(train.len());
        let mut sse = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&SequenceSample> = chunk.iter().map(|&i| &train[i]).collect();
            let (mut grads, batch_sse) = batch_gradient(&params, &batch, exec)?;
            if !batch_sse.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            if let Some(max_norm) = config.grad_clip {
                clip_global_norm(&mut grads, max_norm);
            }
            optimizer.step(&mut params, &grads)?;
            used.extend(batch.iter().map(|s| s.engine_id));
            sse += batch_sse;
        }
        let val_mse = if val.is_empty() {
            None
        } else {
            Some(mean_squared_error(&params, val, exec)?)
        };
        let record = EpochRecord {
            epoch,
            train_mse: sse / train.len() as f64,
            val_mse,
            seconds: start.elapsed().as_secs_f64(),
        };
        progress(&record);
        history.epochs.push(record);
    }
    Ok(Fit {
        params,
        optimizer,
        history,
        gradient_engine_ids: used,
    })
}

pub fn train(
    config: &TrainConfig,
    train_samples: &[SequenceSample],
    val_samples: &[SequenceSample],
    exec: Execution,
) -> Result<TrainOutcome> {
    train_with_progress(config, train_samples, val_samples, exec, &mut |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_progress(
    config: &TrainConfig,
    train_samples: &[SequenceSample],
    val_samples: &[SequenceSample],
    exec: Execution,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    let first = train_samples
        .first()
        .ok_or_else(|| Error::Config("training set is empty".into()))?;
    let (window, features) = first.window.shape();
    if let Some(bad) = train_samples
        .iter()
        .chain(val_samples)
        .find(|s| s.window.shape() != (window, features))
    {
        return Err(Error::Validation(format!(
            "sample from engine {} has shape {:?}, expected {:?}",
            bad.engine_id,
            bad.window.shape(),
            (window, features)
        )));
    }
    if config.model == ModelKind::Lstm && window != config.window {
        return Err(Error::Config(format!(
            "samples have {window} timesteps but config.window = {}",
            config.window
        )));
    }
    let overlap: Vec<u32> = engine_ids(train_samples)
        .intersection(&engine_ids(val_samples))
        .copied()
        .collect();
    if !overlap.is_empty() {
        return Err(Error::Validation(format!(
            "engines {overlap:?} appear in both training and validation samples"
        )));
    }

    Ok(match config.init_model(features)? {
        Model::Mlp(p) => {
            let f = fit(p, config, train_samples, val_samples, exec, progress)?;
            TrainOutcome {
                model: Model::Mlp(f.params),
                optimizer: f.optimizer,
                history: f.history,
                gradient_engine_ids: f.gradient_engine_ids,
            }
        }
        Model::Lstm(p) => {
            let f = fit(p, config, train_samples, val_samples, exec, progress)?;
            TrainOutcome {
                model: Model::Lstm(f.params),
                optimizer: f.optimizer,
                history: f.history,
                gradient_engine_ids: f.gradient_engine_ids,
            }
        }
        Model::Lookup(_) => unreachable!("init_model never builds a lookup table"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub engine_id: u32,
    pub true_rul: f64,
    pub predicted_rul: f64,
    /// `max(predicted_rul, 0)`; the raw value is the one scored.
    pub predicted_rul_clamped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub engines: usize,
    pub mse: f64,
    pub rmse: f64,
    pub seed: u64,
    pub config_hash: String,
    pub checkpoint_hash: String,
    pub rows: Vec<EvalRow>,
}

/// Predicts the final RUL of each test engine and scores it against the label file.
///
/// Test engines go through the same chain as training; only the last window
/// (or row, for the MLP) of each engine is scored.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    model: &Model,
    test: &[EngineTrajectory],
    labels: &RulLabelFile,
    preprocess: &PreprocessConfig,
    selection: &FeatureSelection,
    scaler: &ScalerParams,
    exec: Execution,
) -> Result<EvalReport> {
    if labels.ruls.len() != test.len() {
        return Err(Error::Validation(format!(
            "{} RUL labels for {} test engines",
            labels.ruls.len(),
            test.len()
        )));
    }
    let inputs = prepare_inference(preprocess, selection, scaler, test, exec)?;
    let preds = exec.map(&inputs, |inp| model.predict_engine(inp.engine_id, &inp.window));
    let mut rows = Vec::with_capacity(inputs.len());
    for ((inp, pred), &label) in inputs.iter().zip(preds).zip(&labels.ruls) {
        let predicted_rul = pred?;
        rows.push(EvalRow {
            engine_id: inp.engine_id,
            true_rul: f64::from(label),
            predicted_rul,
            predicted_rul_clamped: predicted_rul.max(0.0),
        });
    }
    let mse = report_mse(&rows);
    Ok(EvalReport {
        model: model.kind_name().to_string(),
        engines: rows.len(),
        mse,
        rmse: mse.sqrt(),
        seed: preprocess.seed,
        config_hash: String::new(),
        checkpoint_hash: String::new(),
        rows,
    })
}

pub fn report_mse(rows: &[EvalRow]) -> f64 {
    if rows.is_empty() {
        return f64::NAN;
    }
    rows.iter()
        .map(|r| (r.predicted_rul - r.true_rul).powi(2))
        .sum::<f64>()
        / rows.len() as f64
}
