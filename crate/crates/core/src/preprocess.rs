//! Turning raw trajectories into model-ready samples.
//!
//! Fixed order: drop channels → smooth sensors → trim warm-up → fit scaler on
//! training-file engines → scale → label RUL → window. Each step is exposed on
//! its own and [`prepare_training`] chains them.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{EngineTrajectory, N_SENSORS, N_SETTINGS};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numerics::{Matrix, SeededRng};

/// Sensors (1-based) that stay flat over the whole FD001 training set.
pub const DEFAULT_DROPPED_SENSORS: [usize; 7] = [1, 5, 6, 10, 16, 18, 19];

/// Range below which a channel counts as constant.
pub const CONSTANT_TOLERANCE: f64 = 1e-12;

/// A sensor that only ever flickers between this many recorded levels carries
/// no trend either (FD001 sensor 6 alternates between 21.60 and 21.61).
pub const QUASI_CONSTANT_LEVELS: usize = 2;

pub const RNG_STREAM_SPLIT: u64 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    pub alpha: f64,
    pub trim: usize,
    pub window: usize,
    pub rul_cap: Option<f64>,
    pub n_val: usize,
    pub seed: u64,
    /// 1-based sensor indices excluded from the features.
    pub dropped_sensors: Vec<usize>,
    /// Drop operating settings that are constant on the training engines.
    pub drop_constant_settings: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            trim: 10,
            window: 20,
            rul_cap: None,
            n_val: 20,
            seed: 42,
            dropped_sensors: DEFAULT_DROPPED_SENSORS.to_vec(),
            drop_constant_settings: true,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.window == 0 {
            return Err(Error::Config("window must be positive".into()));
        }
        if let Some(cap) = self.rul_cap {
            if !(cap > 0.0 && cap.is_finite()) {
                return Err(Error::Config(format!("rul_cap must be positive, got {cap}")));
            }
        }
        for &s in &self.dropped_sensors {
            if !(1..=N_SENSORS).contains(&s) {
                return Err(Error::Config(format!("sensor index {s} outside 1..={N_SENSORS}")));
            }
        }
        Ok(())
    }
}

/// Which raw channels become model features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSelection {
    /// 1-based sensor indices.
    pub dropped_sensors: BTreeSet<usize>,
    /// 1-based setting indices.
    pub dropped_settings: BTreeSet<usize>,
}

impl Default for FeatureSelection {
    fn default() -> Self {
        Self {
            dropped_sensors: DEFAULT_DROPPED_SENSORS.into_iter().collect(),
            dropped_settings: BTreeSet::new(),
        }
    }
}

impl FeatureSelection {
    /// Raw channel indices (0..3 settings, 3..24 sensors) that are kept, in order.
    pub fn kept_channels(&self) -> Vec<usize> {
        let settings = (0..N_SETTINGS).filter(|i| !self.dropped_settings.contains(&(i + 1)));
        let sensors = (0..N_SENSORS)
            .filter(|i| !self.dropped_sensors.contains(&(i + 1)))
            .map(|i| i + N_SETTINGS);
        settings.chain(sensors).collect()
    }

    pub fn kept_feature_count(&self) -> usize {
        self.kept_channels().len()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.kept_channels().into_iter().map(channel_name).collect()
    }
}

pub fn channel_name(channel: usize) -> String {
    if channel < N_SETTINGS {
        format!("setting{}", channel + 1)
    } else {
        format!("sensor{}", channel - N_SETTINGS + 1)
    }
}

fn channel_is_constant(values: impl Iterator<Item = f64>, max_levels: usize) -> bool {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut levels: Vec<u64> = Vec::new();
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
        let bits = v.to_bits();
        if levels.len() <= max_levels && !levels.contains(&bits) {
            levels.push(bits);
        }
    }
    if !lo.is_finite() {
        return false;
    }
    hi - lo <= CONSTANT_TOLERANCE || levels.len() <= max_levels
}

/// 1-based indices of sensors with no usable variation over all engines and cycles.
pub fn detect_constant_sensors(trajectories: &[EngineTrajectory]) -> BTreeSet<usize> {
    (0..N_SENSORS)
        .filter(|&s| {
            let vals = trajectories
                .iter()
                .flat_map(|t| t.cycles.iter().map(move |c| c.sensors[s]));
            channel_is_constant(vals, QUASI_CONSTANT_LEVELS)
        })
        .map(|s| s + 1)
        .collect()
}

/// 1-based indices of operating settings whose range is within [`CONSTANT_TOLERANCE`].
pub fn detect_constant_settings(trajectories: &[EngineTrajectory]) -> BTreeSet<usize> {
    (0..N_SETTINGS)
        .filter(|&s| {
            let vals = trajectories
                .iter()
                .flat_map(|t| t.cycles.iter().map(move |c| c.op_settings[s]));
            channel_is_constant(vals, 1)
        })
        .map(|s| s + 1)
        .collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("EWMA alpha must lie in (0, 1], got {alpha}")))
    }
}

/// One EWMA update. The difference form leaves a constant series exactly
/// unchanged; `alpha == 1` short-circuits so it is exactly the identity.
#[inline]
fn ewma_step(prev: f64, x: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        x
    } else {
        prev + alpha * (x - prev)
    }
}

/// Exponentially weighted moving average seeded with the first sample.
pub fn ewma_smooth(series: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let mut out = Vec::with_capacity(series.len());
    let mut prev = match series.first() {
        Some(&x) => x,
        None => return Ok(out),
    };
    out.push(prev);
    for &x in &series[1..] {
        prev = ewma_step(prev, x, alpha);
        out.push(prev);
    }
    Ok(out)
}

/// Smooths every sensor channel of one engine. Operating settings are left as recorded.
pub fn smooth_sensors(trajectory: &EngineTrajectory, alpha: f64) -> Result<EngineTrajectory> {
    check_alpha(alpha)?;
    let mut out = trajectory.clone();
    let mut state = match trajectory.cycles.first() {
        Some(c) => c.sensors,
        None => return Ok(out),
    };
    for rec in out.cycles.iter_mut().skip(1) {
        for (s, x) in state.iter_mut().zip(rec.sensors.iter_mut()) {
            *s = ewma_step(*s, *x, alpha);
            *x = *s;
        }
    }
    Ok(out)
}

/// Drops the first `n` cycles. Cycle numbers of the remaining records are kept.
pub fn trim_head(trajectory: &EngineTrajectory, n: usize) -> Result<EngineTrajectory> {
    if n > 0 && trajectory.len() <= n {
        return Err(Error::DegenerateTrajectory {
            engine_id: trajectory.engine_id,
            len: trajectory.len(),
            required: n,
        });
    }
    Ok(EngineTrajectory {
        engine_id: trajectory.engine_id,
        cycles: trajectory.cycles[n..].to_vec(),
    })
}

/// Per-feature minimum and maximum fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub feature_names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalerParams {
    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    /// Maps one raw row into [0, 1], clamping values outside the fitted range.
    pub fn transform_row(&self, raw: &[f64], out: &mut [f64]) {
        for k in 0..self.min.len() {
            let v = (raw[k] - self.min[k]) / (self.max[k] - self.min[k]);
            out[k] = v.clamp(0.0, 1.0);
        }
    }

    pub fn inverse_row(&self, scaled: &[f64]) -> Vec<f64> {
        scaled
            .iter()
            .enumerate()
            .map(|(k, &v)| self.min[k] + v * (self.max[k] - self.min[k]))
            .collect()
    }
}

fn feature_row(rec: &crate::dataset::CycleRecord, channels: &[usize], out: &mut [f64]) {
    for (o, &c) in out.iter_mut().zip(channels) {
        *o = rec.channel(c);
    }
}

pub fn fit_minmax(train: &[EngineTrajectory], selection: &FeatureSelection) -> Result<ScalerParams> {
    let channels = selection.kept_channels();
    let names = selection.feature_names();
    let f = channels.len();
    let mut min = vec![f64::INFINITY; f];
    let mut max = vec![f64::NEG_INFINITY; f];
    let mut row = vec![0.0; f];
    let mut seen = false;
    for rec in train.iter().flat_map(|t| &t.cycles) {
        seen = true;
        feature_row(rec, &channels, &mut row);
        for k in 0..f {
            min[k] = min[k].min(row[k]);
            max[k] = max[k].max(row[k]);
        }
    }
    if !seen {
        return Err(Error::Validation("cannot fit a scaler on zero rows".into()));
    }
    for k in 0..f {
        if max[k] <= min[k] {
            return Err(Error::ConstantFeature {
                feature: names[k].clone(),
                value: min[k],
            });
        }
    }
    Ok(ScalerParams {
        feature_names: names,
        min,
        max,
    })
}

/// An engine's selected features after scaling, one row per retained cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledTrajectory {
    pub engine_id: u32,
    pub cycles: Vec<u32>,
    pub features: Matrix,
}

pub fn apply_minmax(
    scaler: &ScalerParams,
    selection: &FeatureSelection,
    trajectory: &EngineTrajectory,
) -> Result<ScaledTrajectory> {
    let names = selection.feature_names();
    if names != scaler.feature_names {
        return Err(Error::FeatureOrder {
            expected: scaler.feature_names.clone(),
            actual: names,
        });
    }
    let channels = selection.kept_channels();
    let f = channels.len();
    let mut features = Matrix::zeros(trajectory.len(), f);
    let mut raw = vec![0.0; f];
    for (r, rec) in trajectory.cycles.iter().enumerate() {
        feature_row(rec, &channels, &mut raw);
        scaler.transform_row(&raw, features.row_mut(r));
    }
    Ok(ScaledTrajectory {
        engine_id: trajectory.engine_id,
        cycles: trajectory.cycles.iter().map(|c| c.cycle).collect(),
        features,
    })
}

/// Remaining cycles at every listed cycle: `(last − t) + terminal`, optionally capped.
///
/// `last_cycle` is the final *recorded* cycle of the engine, which stays the
/// same after head trimming.
pub fn label_rul(cycles: &[u32], last_cycle: u32, terminal_rul: u32, cap: Option<f64>) -> Vec<f64> {
    cycles
        .iter()
        .map(|&t| {
            let r = f64::from(last_cycle - t) + f64::from(terminal_rul);
            cap.map_or(r, |c| r.min(c))
        })
        .collect()
}

/// A run of consecutive cycles from one engine, oldest first, with the RUL at its last cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub engine_id: u32,
    pub end_cycle: u32,
    pub window: Matrix,
    pub target_rul: f64,
}

/// One cycle's features with its RUL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSample {
    pub engine_id: u32,
    pub cycle: u32,
    pub features: Vec<f64>,
    pub target_rul: f64,
}

/// One window per end position: `len − window + 1` samples.
pub fn make_windows(
    scaled: &ScaledTrajectory,
    ruls: &[f64],
    window: usize,
) -> Result<Vec<SequenceSample>> {
    let len = scaled.features.rows();
    if ruls.len() != len {
        return Err(Error::Validation(format!(
            "engine {}: {} labels for {} rows",
            scaled.engine_id,
            ruls.len(),
            len
        )));
    }
    if window == 0 || len < window {
        return Err(Error::DegenerateTrajectory {
            engine_id: scaled.engine_id,
            len,
            required: window.saturating_sub(1),
        });
    }
    let f = scaled.features.cols();
    let data = scaled.features.data();
    Ok((window - 1..len)
        .map(|end| {
            let start = end + 1 - window;
            SequenceSample {
                engine_id: scaled.engine_id,
                end_cycle: scaled.cycles[end],
                window: Matrix::from_vec(window, f, data[start * f..(end + 1) * f].to_vec())
                    .expect("window slice has window*f entries"),
                target_rul: ruls[end],
            }
        })
        .collect())
}

/// The row-model counterpart of a sequence sample: its final row.
pub fn last_row(sample: &SequenceSample) -> RowSample {
    RowSample {
        engine_id: sample.engine_id,
        cycle: sample.end_cycle,
        features: sample.window.row(sample.window.rows() - 1).to_vec(),
        target_rul: sample.target_rul,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub training_engine_ids: BTreeSet<u32>,
    pub validation_engine_ids: BTreeSet<u32>,
}

/// Holds out `n_val` engines chosen by a seeded shuffle.
pub fn split_by_engine(engine_ids: &[u32], n_val: usize, seed: u64) -> Result<SplitSpec> {
    if n_val > 0 && n_val >= engine_ids.len() {
        return Err(Error::Config(format!(
            "cannot hold out {n_val} of {} engines for validation",
            engine_ids.len()
        )));
    }
    let mut ids: Vec<u32> = engine_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut rng = SeededRng::with_stream(seed, RNG_STREAM_SPLIT);
    rng.shuffle(&mut ids);
    Ok(SplitSpec {
        seed,
        validation_engine_ids: ids[..n_val].iter().copied().collect(),
        training_engine_ids: ids[n_val..].iter().copied().collect(),
    })
}

/// A training-file engine after the full chain, ready for windowing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessedEngine {
    pub engine_id: u32,
    pub cycles: Vec<u32>,
    pub features: Matrix,
    pub rul: Vec<f64>,
}

impl ProcessedEngine {
    pub fn windows(&self, window: usize) -> Result<Vec<SequenceSample>> {
        let scaled = ScaledTrajectory {
            engine_id: self.engine_id,
            cycles: self.cycles.clone(),
            features: self.features.clone(),
        };
        make_windows(&scaled, &self.rul, window)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTraining {
    pub config: PreprocessConfig,
    pub selection: FeatureSelection,
    pub scaler: ScalerParams,
    pub split: SplitSpec,
    pub engines: Vec<ProcessedEngine>,
}

impl PreparedTraining {
    fn samples_for(&self, ids: &BTreeSet<u32>) -> Result<Vec<SequenceSample>> {
        let mut out = Vec::new();
        for e in self.engines.iter().filter(|e| ids.contains(&e.engine_id)) {
            out.extend(e.windows(self.config.window)?);
        }
        Ok(out)
    }

    pub fn all_sequences(&self) -> Result<Vec<SequenceSample>> {
        let mut out = Vec::new();
        for e in &self.engines {
            out.extend(e.windows(self.config.window)?);
        }
        Ok(out)
    }

    pub fn training_sequences(&self) -> Result<Vec<SequenceSample>> {
        self.samples_for(&self.split.training_engine_ids)
    }

    pub fn validation_sequences(&self) -> Result<Vec<SequenceSample>> {
        self.samples_for(&self.split.validation_engine_ids)
    }
}

/// Feature selection for a given training set: the configured sensor drop list
/// plus, when enabled, any operating setting that never changes.
pub fn selection_for(config: &PreprocessConfig, train: &[EngineTrajectory]) -> FeatureSelection {
    FeatureSelection {
        dropped_sensors: config.dropped_sensors.iter().copied().collect(),
        dropped_settings: if config.drop_constant_settings {
            detect_constant_settings(train)
        } else {
            BTreeSet::new()
        },
    }
}

/// Runs the whole chain over the training file.
///
/// The scaler is fitted on every training-file engine before the validation
/// split is drawn; the split only decides which engines feed gradients.
pub fn prepare_training(
    config: &PreprocessConfig,
    train: &[EngineTrajectory],
    exec: Execution,
) -> Result<PreparedTraining> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Validation("no training engines".into()));
    }
    let selection = selection_for(config, train);

    let trimmed: Vec<EngineTrajectory> = exec
        .map(train, |t| {
            let smoothed = smooth_sensors(t, config.alpha)?;
            trim_head(&smoothed, config.trim)
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let scaler = fit_minmax(&trimmed, &selection)?;

    let engines: Vec<ProcessedEngine> = exec
        .map(&trimmed, |t| {
            let scaled = apply_minmax(&scaler, &selection, t)?;
            let rul = label_rul(&scaled.cycles, t.last_cycle(), 0, config.rul_cap);
            if scaled.features.rows() < config.window {
                return Err(Error::DegenerateTrajectory {
                    engine_id: t.engine_id,
                    len: scaled.features.rows() + config.trim,
                    required: config.trim + config.window - 1,
                });
            }
            Ok(ProcessedEngine {
                engine_id: scaled.engine_id,
                cycles: scaled.cycles,
                features: scaled.features,
                rul,
            })
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let ids: Vec<u32> = engines.iter().map(|e| e.engine_id).collect();
    let split = split_by_engine(&ids, config.n_val, config.seed)?;

    Ok(PreparedTraining {
        config: config.clone(),
        selection,
        scaler,
        split,
        engines,
    })
}

/// The final input window for one engine with no run-to-failure record.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceInput {
    pub engine_id: u32,
    pub last_cycle: u32,
    /// `window × F`, oldest row first.
    pub window: Matrix,
    /// Cycles actually trimmed (less than configured for short engines).
    pub trimmed: usize,
    /// Rows repeated at the front because the engine was shorter than one window.
    pub padded: usize,
}

/// Builds the last window of every engine with the same chain as training.
///
/// Engines too short for `trim + window` first lose less of their head; if
/// still shorter than a window, the earliest scaled row is repeated at the front.
pub fn prepare_inference(
    config: &PreprocessConfig,
    selection: &FeatureSelection,
    scaler: &ScalerParams,
    trajectories: &[EngineTrajectory],
    exec: Execution,
) -> Result<Vec<InferenceInput>> {
    config.validate()?;
    exec.map(trajectories, |t| {
        if t.is_empty() {
            return Err(Error::Validation(format!("engine {} has no cycles", t.engine_id)));
        }
        let len = t.len();
        let trim = config.trim.min(len.saturating_sub(config.window));
        let smoothed = smooth_sensors(t, config.alpha)?;
        let trimmed = trim_head(&smoothed, trim)?;
        let scaled = apply_minmax(scaler, selection, &trimmed)?;
        let rows = scaled.features.rows();
        let f = scaled.features.cols();
        let padded = config.window.saturating_sub(rows);
        let mut window = Matrix::zeros(config.window, f);
        for r in 0..config.window {
            let src = (rows + r).saturating_sub(config.window);
            window.row_mut(r).copy_from_slice(scaled.features.row(src));
        }
        Ok(InferenceInput {
            engine_id: t.engine_id,
            last_cycle: t.last_cycle(),
            window,
            trimmed: trim,
            padded,
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CycleRecord;

    fn engine(id: u32, len: usize, f: impl Fn(usize, usize) -> f64) -> EngineTrajectory {
        EngineTrajectory {
            engine_id: id,
            cycles: (0..len)
                .map(|t| {
                    let mut sensors = [0.0; N_SENSORS];
                    for (s, v) in sensors.iter_mut().enumerate() {
                        *v = f(t, s);
                    }
                    CycleRecord {
                        cycle: t as u32 + 1,
                        op_settings: [t as f64 * 0.01, -(t as f64), 100.0],
                        sensors,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn ewma_fixed_point_identity_and_hand_value() {
        assert_eq!(ewma_smooth(&[3.5; 3], 0.37).unwrap(), vec![3.5; 3]);
        let x = [1.0, -2.0, 7.25, 0.5];
        assert_eq!(ewma_smooth(&x, 1.0).unwrap(), x.to_vec());
        let s = ewma_smooth(&[1.0, 2.0], 0.1).unwrap();
        assert_eq!(s[0], 1.0);
        assert!((s[1] - 1.1).abs() < 1e-15);
        assert!(ewma_smooth(&[], 0.5).unwrap().is_empty());
    }

    #[test]
    fn ewma_rejects_bad_alpha() {
        for a in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(ewma_smooth(&[1.0], a), Err(Error::Config(_))), "{a}");
        }
    }

    #[test]
    fn smooth_sensors_matches_series_ewma_and_skips_settings() {
        let e = engine(1, 12, |t, s| ((t * 7 + s * 3) % 5) as f64);
        let sm = smooth_sensors(&e, 0.3).unwrap();
        for s in 0..N_SENSORS {
            let series: Vec<f64> = e.cycles.iter().map(|c| c.sensors[s]).collect();
            let expect = ewma_smooth(&series, 0.3).unwrap();
            let got: Vec<f64> = sm.cycles.iter().map(|c| c.sensors[s]).collect();
            assert_eq!(got, expect);
        }
        for (a, b) in e.cycles.iter().zip(&sm.cycles) {
            assert_eq!(a.op_settings, b.op_settings);
        }
    }

    #[test]
    fn trim_head_cases() {
        let e = engine(4, 30, |t, _| t as f64);
        let t = trim_head(&e, 10).unwrap();
        assert_eq!(t.len(), 20);
        assert_eq!(t.cycles[0].cycle, 11);
        assert_eq!(trim_head(&e, 0).unwrap(), e);
        match trim_head(&e, 30) {
            Err(Error::DegenerateTrajectory { engine_id, .. }) => assert_eq!(engine_id, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_sensor_detection() {
        // Sensor 3 (index 2) constant, everything else varies.
        let e = engine(1, 20, |t, s| if s == 2 { 7.0 } else { (t * (s + 1)) as f64 });
        assert_eq!(detect_constant_sensors(&[e]), BTreeSet::from([3]));
        let all = engine(1, 20, |t, s| (t * (s + 1)) as f64 + 0.5);
        assert!(detect_constant_sensors(&[all]).is_empty());
        // A two-level flicker is treated as constant.
        let flick = engine(1, 20, |t, s| match s {
            5 => if t % 7 == 0 { 21.60 } else { 21.61 },
            _ => (t * (s + 1)) as f64,
        });
        assert_eq!(detect_constant_sensors(&[flick]), BTreeSet::from([6]));
    }

    #[test]
    fn constant_setting_detection() {
        let e = engine(1, 5, |t, _| t as f64);
        assert_eq!(detect_constant_settings(&[e]), BTreeSet::from([3]));
    }

    #[test]
    fn default_selection_has_seventeen_features() {
        let sel = FeatureSelection::default();
        assert_eq!(sel.kept_feature_count(), 3 + 21 - 7);
        let names = sel.feature_names();
        assert_eq!(names[0], "setting1");
        assert_eq!(names[3], "sensor2");
        assert!(!names.contains(&"sensor6".to_string()));
    }

    fn one_feature_selection() -> FeatureSelection {
        FeatureSelection {
            dropped_sensors: (2..=21).collect(),
            dropped_settings: BTreeSet::from([1, 2, 3]),
        }
    }

    #[test]
    fn minmax_fit_and_apply() {
        let sel = one_feature_selection();
        let e = engine(1, 11, |t, _| t as f64);
        let sc = fit_minmax(std::slice::from_ref(&e), &sel).unwrap();
        assert_eq!((sc.min[0], sc.max[0]), (0.0, 10.0));
        assert_eq!(fit_minmax(std::slice::from_ref(&e), &sel).unwrap(), sc);
        let scaled = apply_minmax(&sc, &sel, &e).unwrap();
        assert_eq!(scaled.features.get(0, 0), 0.0);
        assert_eq!(scaled.features.get(10, 0), 1.0);
        assert_eq!(scaled.features.get(5, 0), 0.5);
        let below = engine(2, 1, |_, _| -4.0);
        assert_eq!(apply_minmax(&sc, &sel, &below).unwrap().features.get(0, 0), 0.0);
        let above = engine(2, 1, |_, _| 99.0);
        assert_eq!(apply_minmax(&sc, &sel, &above).unwrap().features.get(0, 0), 1.0);
    }

    #[test]
    fn minmax_rejects_constant_feature_and_order_mismatch() {
        let e = engine(1, 5, |_, _| 3.0);
        match fit_minmax(std::slice::from_ref(&e), &one_feature_selection()) {
            Err(Error::ConstantFeature { feature, .. }) => assert_eq!(feature, "sensor1"),
            other => panic!("{other:?}"),
        }
        let good = engine(1, 5, |t, _| t as f64);
        let sc = fit_minmax(&[good.clone()], &one_feature_selection()).unwrap();
        let other = FeatureSelection {
            dropped_sensors: (1..=20).collect(),
            dropped_settings: BTreeSet::from([1, 2, 3]),
        };
        assert!(matches!(apply_minmax(&sc, &other, &good), Err(Error::FeatureOrder { .. })));
    }

    #[test]
    fn rul_labels() {
        let cycles: Vec<u32> = (1..=192).collect();
        let r = label_rul(&cycles, 192, 0, None);
        assert_eq!(r[191], 0.0);
        assert_eq!(r[0], 191.0);
        let r = label_rul(&[31], 31, 112, None);
        assert_eq!(r, vec![112.0]);
        let r = label_rul(&cycles, 192, 0, Some(125.0));
        assert_eq!(r[0], 125.0);
        assert_eq!(r[191], 0.0);
    }

    fn scaled(len: usize) -> ScaledTrajectory {
        ScaledTrajectory {
            engine_id: 9,
            cycles: (11..11 + len as u32).collect(),
            features: Matrix::from_vec(len, 2, (0..2 * len).map(|v| v as f64).collect()).unwrap(),
        }
    }

    #[test]
    fn window_counts() {
        let s = scaled(20);
        let w = make_windows(&s, &vec![0.0; 20], 20).unwrap();
        assert_eq!(w.len(), 1);
        let s = scaled(25);
        let ruls: Vec<f64> = (0..25).rev().map(f64::from).collect();
        let w = make_windows(&s, &ruls, 20).unwrap();
        assert_eq!(w.len(), 6);
        assert_eq!(w[0].end_cycle, 30);
        assert_eq!(w[0].target_rul, 5.0);
        assert_eq!(w[5].target_rul, 0.0);
        assert_eq!(w[5].window.row(19), s.features.row(24));
        assert_eq!(w[5].window.row(0), s.features.row(5));
        assert!(make_windows(&scaled(19), &vec![0.0; 19], 20).is_err());
    }

    #[test]
    fn split_cases() {
        let ids: Vec<u32> = (1..=100).collect();
        let s = split_by_engine(&ids, 20, 7).unwrap();
        assert_eq!(s.validation_engine_ids.len(), 20);
        assert_eq!(s.training_engine_ids.len(), 80);
        assert!(s.validation_engine_ids.is_disjoint(&s.training_engine_ids));
        assert_eq!(s, split_by_engine(&ids, 20, 7).unwrap());
        assert_ne!(s, split_by_engine(&ids, 20, 8).unwrap());
        let none = split_by_engine(&ids, 0, 7).unwrap();
        assert_eq!(none.training_engine_ids.len(), 100);
        assert!(matches!(split_by_engine(&ids, 100, 7), Err(Error::Config(_))));
    }

    #[test]
    fn inference_pads_short_engines() {
        let train: Vec<_> = (1..=3)
            .map(|id| engine(id, 40, |t, s| (t as f64 + s as f64 * 0.1) * id as f64))
            .collect();
        let cfg = PreprocessConfig { n_val: 1, ..Default::default() };
        let prep = prepare_training(&cfg, &train, Execution::Sequential).unwrap();

        let long = engine(10, 35, |t, s| t as f64 + s as f64);
        let mid = engine(11, 25, |t, s| t as f64 + s as f64);
        let short = engine(12, 8, |t, s| t as f64 + s as f64);
        let out = prepare_inference(
            &cfg,
            &prep.selection,
            &prep.scaler,
            &[long, mid, short],
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!((out[0].trimmed, out[0].padded), (10, 0));
        assert_eq!((out[1].trimmed, out[1].padded), (5, 0));
        assert_eq!((out[2].trimmed, out[2].padded), (0, 12));
        for inp in &out {
            assert_eq!(inp.window.rows(), 20);
        }
        // Front padding repeats the earliest row.
        assert_eq!(out[2].window.row(0), out[2].window.row(12));
    }
}
