//! `rul`: preprocess FD001, train an MLP or LSTM, evaluate and predict remaining useful life.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rul_core::artifacts::{
    self, load_bundle, timings_csv, to_json_pretty, BundleHeader, Checkpoint,
};
use rul_core::dataset::{self, dataset_summary, parse_trajectory_file};
use rul_core::gradcheck::{gradient_check_suite, GRAD_TOLERANCE};
use rul_core::invariants::preprocessing_checks;
use rul_core::models::ModelKind;
use rul_core::preprocess::{prepare_inference, prepare_training, PreparedTraining, PreprocessConfig};
use rul_core::{pipeline, synthetic, Execution};

use config::{require_files, resolve, CommonArgs};
use output::{read, write_all, write_atomic};

#[derive(Debug, Parser)]
#[command(name = "rul", version, about = "Remaining-useful-life estimation on C-MAPSS FD001")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    /// Run single-threaded even when built with the `parallel` feature
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse, smooth, trim, scale, label, window and split the training file
    Preprocess,
    /// Train a model on a preprocessed bundle
    Train {
        /// Directory holding bundle.jsonl and scaler.json (defaults to --out)
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Score a checkpoint on the test file and its RUL labels
    Evaluate {
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Defaults to <out>/checkpoint.json
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Predict the current RUL of every engine in a trajectory file
    Predict {
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Trajectory file in the FD001 column layout
        #[arg(long)]
        input: PathBuf,
        /// CSV destination; printed to stdout when omitted
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Finite-difference gradient checks and preprocessing invariants
    Verify {
        /// Randomised instances per model
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Adds this amount to one analytic gradient entry (self-test of the checker)
        #[arg(long, hide = true)]
        inject_fault: Option<f64>,
    },
    /// Write a synthetic fleet in the FD001 file layout to --out
    #[command(hide = true)]
    Synth {
        #[arg(long, default_value_t = 100)]
        engines: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let common = cli.common;
    match cli.command {
        Command::Preprocess => cmd_preprocess(&common, exec),
        Command::Train { bundle } => cmd_train(&common, bundle, exec),
        Command::Evaluate { bundle, checkpoint } => cmd_evaluate(&common, bundle, checkpoint, exec),
        Command::Predict {
            bundle,
            checkpoint,
            input,
            output,
        } => cmd_predict(&common, bundle, checkpoint, &input, output, exec),
        Command::Verify {
            trials,
            inject_fault,
        } => cmd_verify(&common, trials, inject_fault, exec),
        Command::Synth { engines } => {
            let out = common.out.clone().context("--out is required")?;
            let fleet = synthetic::generate(engines, common.seed.unwrap_or(0));
            write_all(
                &out,
                &[
                    (dataset::TRAIN_FILE, &fleet.train),
                    (dataset::TEST_FILE, &fleet.test),
                    (dataset::RUL_FILE, &fleet.rul),
                ],
            )
        }
    }
}

fn cmd_preprocess(common: &CommonArgs, exec: Execution) -> Result<()> {
    let r = resolve(common)?;
    require_files(&[&r.data.train, &r.data.test, &r.data.rul])?;
    let data = dataset::load(&r.data)?;
    let stats = dataset_summary(&data.train, &data.test, &data.ruls);
    let (_, arts) = pipeline::preprocess(&r.train, &data.train, exec)?;

    let summary = to_json_pretty(&stats)?;
    write_all(
        &r.out,
        &[
            (artifacts::BUNDLE_FILE, &arts.bundle),
            (artifacts::SCALER_FILE, &arts.scaler),
            (artifacts::SPLIT_FILE, &arts.split),
            ("dataset_summary.json", &summary),
        ],
    )?;
    println!(
        "engines: {} train, {} test, {} labels",
        stats.train_engines, stats.test_engines, stats.label_count
    );
    for flag in &stats.flags {
        println!("warning: {flag}");
    }
    println!("features: {}", arts.header.feature_names.join(","));
    println!(
        "training samples: {}",
        arts.header.training_samples + arts.header.validation_samples
    );
    println!(
        "split: {} fit samples, {} validation samples",
        arts.header.training_samples, arts.header.validation_samples
    );
    println!("wrote {}", r.out.display());
    Ok(())
}

fn open_bundle(dir: &Path) -> Result<(BundleHeader, PreparedTraining)> {
    let bundle = read(&dir.join(artifacts::BUNDLE_FILE)).context("no preprocessed bundle; run `rul preprocess`")?;
    let scaler = read(&dir.join(artifacts::SCALER_FILE))?;
    Ok(load_bundle(&bundle, &scaler)?)
}

fn cmd_train(common: &CommonArgs, bundle: Option<PathBuf>, exec: Execution) -> Result<()> {
    let r = resolve(common)?;
    let (header, prep) = open_bundle(bundle.as_deref().unwrap_or(&r.out))?;
    let cfg = &r.train;
    eprintln!(
        "training {} for {} epochs on {} samples ({} validation)",
        cfg.model, cfg.epochs, header.training_samples, header.validation_samples
    );
    let trained = pipeline::train_bundle(cfg, &prep, &header, exec, &mut |e| {
        let val = e.val_mse.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
        eprintln!(
            "epoch {:>3}  train_mse {:>12.3}  val_mse {:>12}  {:.1}s",
            e.epoch, e.train_mse, val, e.seconds
        );
    })?;
    let timings = timings_csv(&trained.outcome.history);
    write_all(
        &r.out,
        &[
            (artifacts::CHECKPOINT_FILE, &trained.checkpoint_json),
            (artifacts::HISTORY_FILE, &trained.history_csv),
            (artifacts::TIMINGS_FILE, &timings),
        ],
    )?;
    if let Some(last) = trained.outcome.history.epochs.last() {
        println!("final train MSE: {}", last.train_mse);
        if let Some(v) = last.val_mse {
            println!("final validation MSE: {v}");
        }
    }
    println!("wrote {}", r.out.display());
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<(String, Checkpoint)> {
    let text = read(path)?;
    let ckpt = Checkpoint::from_json(&text).with_context(|| format!("loading {}", path.display()))?;
    Ok((text, ckpt))
}

fn cmd_evaluate(
    common: &CommonArgs,
    bundle: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    exec: Execution,
) -> Result<()> {
    let r = resolve(common)?;
    let ckpt_path = checkpoint.unwrap_or_else(|| r.out.join(artifacts::CHECKPOINT_FILE));
    let (text, _) = load_checkpoint(&ckpt_path)?;
    let (header, prep) = open_bundle(bundle.as_deref().unwrap_or(&r.out))?;
    require_files(&[&r.data.test, &r.data.rul])?;
    let test = parse_trajectory_file(&read(&r.data.test)?)
        .with_context(|| r.data.test.display().to_string())?;
    let labels = dataset::parse_rul_file(&read(&r.data.rul)?)
        .with_context(|| r.data.rul.display().to_string())?;
    let ev = pipeline::evaluate_checkpoint(&text, &prep, &header, &test, &labels, exec)?;
    write_all(
        &r.out,
        &[
            (artifacts::REPORT_FILE, &ev.report_json),
            (artifacts::PREDICTIONS_FILE, &ev.predictions_csv),
        ],
    )?;
    println!("engines: {}", ev.report.engines);
    println!("test MSE: {}", ev.report.mse);
    println!("test RMSE: {}", ev.report.rmse);
    println!("wrote {}", r.out.display());
    Ok(())
}

fn cmd_predict(
    common: &CommonArgs,
    bundle: Option<PathBuf>,
    checkpoint: Option<PathBuf>,
    input: &Path,
    output: Option<PathBuf>,
    exec: Execution,
) -> Result<()> {
    let r = resolve(common)?;
    let ckpt_path = checkpoint.unwrap_or_else(|| r.out.join(artifacts::CHECKPOINT_FILE));
    let (_, ckpt) = load_checkpoint(&ckpt_path)?;
    let (header, prep) = open_bundle(bundle.as_deref().unwrap_or(&r.out))?;
    ckpt.check_scaler(&header)?;
    let trajs = parse_trajectory_file(&read(input)?).with_context(|| input.display().to_string())?;
    let inputs = prepare_inference(&prep.config, &prep.selection, &prep.scaler, &trajs, exec)?;
    let mut csv = String::from("engine_id,last_cycle,predicted_rul,predicted_rul_clamped\n");
    for inp in &inputs {
        let p = ckpt.model.predict_engine(inp.engine_id, &inp.window)?;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            inp.engine_id,
            inp.last_cycle,
            artifacts::format_g17(p),
            artifacts::format_g17(p.max(0.0))
        ));
    }
    match output {
        Some(path) => {
            write_atomic(&path, csv.as_bytes())?;
            println!("wrote {} predictions to {}", inputs.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_verify(common: &CommonArgs, trials: usize, fault: Option<f64>, exec: Execution) -> Result<()> {
    let seed = resolve(common)?.train.seed;
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for kind in [ModelKind::Mlp, ModelKind::Lstm] {
        let rep = gradient_check_suite(kind, trials, seed, fault)?;
        worst = worst.max(rep.max_rel_error);
        println!(
            "gradcheck {kind}: {} trials, {} entries, max rel error {:e}",
            rep.trials, rep.entries_checked, rep.max_rel_error
        );
        if !rep.passed() {
            failures.push(format!(
                "gradcheck {kind}: max rel error {:e} >= {GRAD_TOLERANCE:e} at {:?}",
                rep.max_rel_error, rep.worst
            ));
        }
    }
    println!("max gradient rel error: {worst:e}");

    let fleet = synthetic::generate(100, seed);
    let train = parse_trajectory_file(&fleet.train)?;
    let cfg = PreprocessConfig {
        seed,
        ..PreprocessConfig::default()
    };
    let prep = prepare_training(&cfg, &train, exec)?;
    for c in preprocessing_checks(&prep, &train, cfg.n_val)? {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
        if !c.passed {
            failures.push(format!("{}: {}", c.name, c.detail));
        }
    }

    if failures.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        bail!("{} check(s) failed:\n  {}", failures.len(), failures.join("\n  "))
    }
}
