//! Stage glue shared by the command-line driver and the acceptance suite.

use crate::artifacts::{
    self, history_csv, predictions_csv, preprocess_artifacts, report_json, sha256_hex, BundleHeader,
    Checkpoint, PreprocessArtifacts,
};
use crate::dataset::{EngineTrajectory, Fd001, RulLabelFile};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::preprocess::{prepare_training, PreparedTraining};
use crate::train::{evaluate, train_with_progress, EpochRecord, EvalReport, TrainConfig, TrainOutcome};

pub fn preprocess(
    config: &TrainConfig,
    train: &[EngineTrajectory],
    exec: Execution,
) -> Result<(PreparedTraining, PreprocessArtifacts)> {
    config.validate()?;
    let prep = prepare_training(&config.preprocess(), train, exec)?;
    let arts = preprocess_artifacts(&prep)?;
    Ok((prep, arts))
}

/// Rejects a training config whose preprocessing fields differ from the bundle's.
pub fn check_bundle_matches(config: &TrainConfig, header: &BundleHeader) -> Result<()> {
    let wanted = config.preprocess();
    if wanted != header.config {
        return Err(Error::Config(format!(
            "bundle was built with {:?} but this run asks for {:?}; re-run preprocess",
            header.config, wanted
        )));
    }
    Ok(())
}

#[derive(Debug)]
pub struct Trained {
    pub outcome: TrainOutcome,
    pub checkpoint: Checkpoint,
    pub checkpoint_json: String,
    pub history_csv: String,
}

pub fn train_bundle(
    config: &TrainConfig,
    prep: &PreparedTraining,
    header: &BundleHeader,
    exec: Execution,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<Trained> {
    check_bundle_matches(config, header)?;
    let train = prep.training_sequences()?;
    let val = prep.validation_sequences()?;
    let outcome = train_with_progress(config, &train, &val, exec, progress)?;
    let checkpoint = Checkpoint::new(
        outcome.model.clone(),
        Some(outcome.optimizer.clone()),
        Some(config.clone()),
        header,
    )?;
    let checkpoint_json = checkpoint.to_json()?;
    let history_csv = history_csv(&outcome.history);
    Ok(Trained {
        outcome,
        checkpoint,
        checkpoint_json,
        history_csv,
    })
}

#[derive(Debug)]
pub struct Evaluated {
    pub report: EvalReport,
    pub report_json: String,
    pub predictions_csv: String,
}

/// Scores a serialized checkpoint on the test engines.
pub fn evaluate_checkpoint(
    checkpoint_json: &str,
    prep: &PreparedTraining,
    header: &BundleHeader,
    test: &[EngineTrajectory],
    labels: &RulLabelFile,
    exec: Execution,
) -> Result<Evaluated> {
    let checkpoint = Checkpoint::from_json(checkpoint_json)?;
    checkpoint.check_scaler(header)?;
    let mut report = evaluate(
        &checkpoint.model,
        test,
        labels,
        &prep.config,
        &prep.selection,
        &prep.scaler,
        exec,
    )?;
    report.config_hash = if checkpoint.config_hash.is_empty() {
        header.config_hash.clone()
    } else {
        checkpoint.config_hash.clone()
    };
    report.checkpoint_hash = sha256_hex(checkpoint_json.as_bytes());
    Ok(Evaluated {
        report_json: report_json(&report)?,
        predictions_csv: predictions_csv(&report.rows),
        report,
    })
}

/// Every artifact of one end-to-end run, as file contents.
#[derive(Debug)]
pub struct Experiment {
    pub prep: PreparedTraining,
    pub preprocess: PreprocessArtifacts,
    pub trained: Trained,
    pub evaluated: Evaluated,
}

impl Experiment {
    /// `(file name, contents)` for every artifact the run produces.
    pub fn files(&self) -> Vec<(&'static str, &str)> {
        vec![
            (artifacts::BUNDLE_FILE, &self.preprocess.bundle),
            (artifacts::SCALER_FILE, &self.preprocess.scaler),
            (artifacts::SPLIT_FILE, &self.preprocess.split),
            (artifacts::CHECKPOINT_FILE, &self.trained.checkpoint_json),
            (artifacts::HISTORY_FILE, &self.trained.history_csv),
            (artifacts::REPORT_FILE, &self.evaluated.report_json),
            (artifacts::PREDICTIONS_FILE, &self.evaluated.predictions_csv),
        ]
    }
}

pub fn run_experiment(
    config: &TrainConfig,
    data: &Fd001,
    exec: Execution,
    progress: &mut dyn FnMut(&EpochRecord),
) -> Result<Experiment> {
    let (prep, preprocess) = preprocess(config, &data.train, exec)?;
    let trained = train_bundle(config, &prep, &preprocess.header, exec, progress)?;
    let evaluated = evaluate_checkpoint(
        &trained.checkpoint_json,
        &prep,
        &preprocess.header,
        &data.test,
        &data.ruls,
        exec,
    )?;
    Ok(Experiment {
        prep,
        preprocess,
        trained,
        evaluated,
    })
}
