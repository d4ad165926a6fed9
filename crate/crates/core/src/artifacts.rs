//! On-disk formats: preprocessed bundle, scaler, split, checkpoint, CSV reports.
//!
//! Everything here is (de)serialised to strings; callers own the filesystem.
//! JSON floats use shortest round-trip formatting, so reloading is bit-exact.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{Model, GATE_ORDER};
use crate::optim::AdamState;
use crate::preprocess::{
    FeatureSelection, PreparedTraining, PreprocessConfig, ProcessedEngine, ScalerParams, SplitSpec,
};
use crate::train::{EvalReport, EvalRow, TrainConfig, TrainHistory};

pub const BUNDLE_FILE: &str = "bundle.jsonl";
pub const SCALER_FILE: &str = "scaler.json";
pub const SPLIT_FILE: &str = "split.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const REPORT_FILE: &str = "eval_report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

pub const BUNDLE_FORMAT: &str = "rul-bundle/1";
pub const CHECKPOINT_FORMAT: &str = "rul-checkpoint/1";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical (compact JSON) form of a config value.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(serde_json::to_string(value)?.as_bytes()))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// `%.17g`: 17 significant digits, trailing zeros removed, exponent form
/// outside [1e-5, 1e17).
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_fraction(&s).to_string()
    } else {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub format: String,
    pub config: PreprocessConfig,
    pub config_hash: String,
    pub selection: FeatureSelection,
    pub feature_names: Vec<String>,
    pub scaler_hash: String,
    pub split: SplitSpec,
    pub training_samples: usize,
    pub validation_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleEngine {
    pub role: EngineRole,
    #[serde(flatten)]
    pub engine: ProcessedEngine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineRole {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerFile {
    pub config_hash: String,
    #[serde(flatten)]
    pub scaler: ScalerParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub config_hash: String,
    #[serde(flatten)]
    pub split: SplitSpec,
}

/// All text artifacts produced by preprocessing.
#[derive(Debug, Clone)]
pub struct PreprocessArtifacts {
    pub bundle: String,
    pub scaler: String,
    pub split: String,
    pub header: BundleHeader,
}

pub fn preprocess_artifacts(prep: &PreparedTraining) -> Result<PreprocessArtifacts> {
    let hash = config_hash(&prep.config)?;
    let scaler = to_json_pretty(&ScalerFile {
        config_hash: hash.clone(),
        scaler: prep.scaler.clone(),
    })?;
    let split = to_json_pretty(&SplitFile {
        config_hash: hash.clone(),
        split: prep.split.clone(),
    })?;
    let header = BundleHeader {
        format: BUNDLE_FORMAT.into(),
        config: prep.config.clone(),
        config_hash: hash,
        selection: prep.selection.clone(),
        feature_names: prep.scaler.feature_names.clone(),
        scaler_hash: sha256_hex(scaler.as_bytes()),
        split: prep.split.clone(),
        training_samples: prep.training_sequences()?.len(),
        validation_samples: prep.validation_sequences()?.len(),
    };
    let mut bundle = serde_json::to_string(&header)?;
    bundle.push('\n');
    for e in &prep.engines {
        let role = if prep.split.validation_engine_ids.contains(&e.engine_id) {
            EngineRole::Validation
        } else {
            EngineRole::Train
        };
        bundle.push_str(&serde_json::to_string(&BundleEngine {
            role,
            engine: e.clone(),
        })?);
        bundle.push('\n');
    }
    Ok(PreprocessArtifacts {
        bundle,
        scaler,
        split,
        header,
    })
}

/// Reassembles the prepared training data from a bundle and its scaler file.
pub fn load_bundle(bundle: &str, scaler_json: &str) -> Result<(BundleHeader, PreparedTraining)> {
    let mut lines = bundle.lines().filter(|l| !l.trim().is_empty());
    let header: BundleHeader = serde_json::from_str(
        lines
            .next()
            .ok_or_else(|| Error::Validation("bundle is empty".into()))?,
    )?;
    if header.format != BUNDLE_FORMAT {
        return Err(Error::Validation(format!("unsupported bundle format `{}`", header.format)));
    }
    let scaler_hash = sha256_hex(scaler_json.as_bytes());
    if scaler_hash != header.scaler_hash {
        return Err(Error::Validation(format!(
            "scaler.json hash {scaler_hash} does not match bundle ({}); re-run preprocess",
            header.scaler_hash
        )));
    }
    let scaler: ScalerFile = serde_json::from_str(scaler_json)?;
    let mut engines = Vec::new();
    for line in lines {
        let e: BundleEngine = serde_json::from_str(line)?;
        engines.push(e.engine);
    }
    let prep = PreparedTraining {
        config: header.config.clone(),
        selection: header.selection.clone(),
        scaler: scaler.scaler,
        split: header.split.clone(),
        engines,
    };
    Ok((header, prep))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub gate_order: Option<Vec<String>>,
    pub feature_names: Vec<String>,
    pub scaler_hash: String,
    pub preprocess_hash: String,
    pub config: Option<TrainConfig>,
    pub config_hash: String,
    pub model: Model,
    pub optimizer: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(
        model: Model,
        optimizer: Option<AdamState>,
        config: Option<TrainConfig>,
        header: &BundleHeader,
    ) -> Result<Self> {
        let gate_order = matches!(model, Model::Lstm(_))
            .then(|| GATE_ORDER.iter().map(|s| s.to_string()).collect());
        let config_hash = match &config {
            Some(c) => config_hash(c)?,
            None => String::new(),
        };
        Ok(Self {
            format: CHECKPOINT_FORMAT.into(),
            gate_order,
            feature_names: header.feature_names.clone(),
            scaler_hash: header.scaler_hash.clone(),
            preprocess_hash: header.config_hash.clone(),
            config,
            config_hash,
            model,
            optimizer,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Validation(format!("unsupported checkpoint format `{}`", c.format)));
        }
        if let Model::Lstm(_) = c.model {
            let expected: Vec<String> = GATE_ORDER.iter().map(|s| s.to_string()).collect();
            if c.gate_order.as_ref() != Some(&expected) {
                return Err(Error::Validation(format!(
                    "checkpoint gate order {:?} differs from {expected:?}",
                    c.gate_order
                )));
            }
        }
        Ok(c)
    }

    /// Refuses to run against a bundle whose scaler differs from the one trained with.
    pub fn check_scaler(&self, header: &BundleHeader) -> Result<()> {
        if self.scaler_hash != header.scaler_hash {
            return Err(Error::Validation(format!(
                "checkpoint was trained with scaler {} but the bundle's scaler is {}; \
                 inputs would be scaled differently than during training",
                self.scaler_hash, header.scaler_hash
            )));
        }
        if self.feature_names != header.feature_names {
            return Err(Error::FeatureOrder {
                expected: self.feature_names.clone(),
                actual: header.feature_names.clone(),
            });
        }
        Ok(())
    }
}

/// `epoch,train_mse,val_mse`
pub fn history_csv(history: &TrainHistory) -> String {
    let mut s = String::from("epoch,train_mse,val_mse\n");
    for e in &history.epochs {
        let val = e.val_mse.map(format_g17).unwrap_or_default();
        let _ = writeln!(s, "{},{},{}", e.epoch, format_g17(e.train_mse), val);
    }
    s
}

/// Wall-clock per epoch, kept apart from `history.csv` so that file is reproducible.
pub fn timings_csv(history: &TrainHistory) -> String {
    let mut s = String::from("epoch,seconds\n");
    for e in &history.epochs {
        let _ = writeln!(s, "{},{}", e.epoch, format_g17(e.seconds));
    }
    s
}

/// `engine_id,true_rul,predicted_rul,predicted_rul_clamped`
pub fn predictions_csv(rows: &[EvalRow]) -> String {
    let mut s = String::from("engine_id,true_rul,predicted_rul,predicted_rul_clamped\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.engine_id,
            format_g17(r.true_rul),
            format_g17(r.predicted_rul),
            format_g17(r.predicted_rul_clamped)
        );
    }
    s
}

pub fn parse_predictions_csv(text: &str) -> Result<Vec<EvalRow>> {
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = lines
        .next()
        .map(|(_, h)| h.split(',').collect())
        .ok_or_else(|| Error::Validation("predictions.csv is empty".into()))?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Validation(format!("predictions.csv lacks column `{name}`")))
    };
    let (ci, ct, cp) = (col("engine_id")?, col("true_rul")?, col("predicted_rul")?);
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let num = |c: usize| -> Result<f64> {
            f.get(c)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    line: i + 1,
                    message: format!("bad value in column {}", c + 1),
                })
        };
        let predicted_rul = num(cp)?;
        rows.push(EvalRow {
            engine_id: num(ci)? as u32,
            true_rul: num(ct)?,
            predicted_rul,
            predicted_rul_clamped: predicted_rul.max(0.0),
        });
    }
    Ok(rows)
}

pub fn report_json(report: &EvalReport) -> Result<String> {
    to_json_pretty(report)
}
