use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rul_core::dataset::DatasetPaths;
use rul_core::models::ModelKind;
use rul_core::train::TrainConfig;
use serde::Deserialize;

/// Environment variable naming the directory that holds the three FD001 files.
pub const DATA_DIR_ENV: &str = "CMAPSS_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data/CMAPSS";
pub const DEFAULT_OUT_DIR: &str = "runs/default";

/// On-disk run configuration. Relative paths resolve against the file's directory.
///
/// ```toml
/// out = "runs/lstm"
///
/// [data]
/// dir = "data/CMAPSS"
///
/// [training]
/// model = "lstm"
/// epochs = 35
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub training: TrainConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub dir: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub rul: Option<PathBuf>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfigFile =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        rebase(&mut cfg.out);
        rebase(&mut cfg.data.dir);
        rebase(&mut cfg.data.train);
        rebase(&mut cfg.data.test);
        rebase(&mut cfg.data.rul);
        Ok(cfg)
    }
}

/// Flags accepted by every subcommand. Any flag given wins over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_model)]
    pub model: Option<ModelKind>,
    /// Output directory for artifacts
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub batch_size: Option<usize>,
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// EWMA smoothing factor in (0, 1]
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Upper bound on training RUL targets
    #[arg(long, global = true)]
    pub rul_cap: Option<f64>,
    /// Directory containing train_FD001.txt, test_FD001.txt and RUL_FD001.txt
    #[arg(long, global = true)]
    pub data_dir: Option<PathBuf>,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: rul_core::Error| e.to_string())
}

/// Config file merged with flags and validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub train: TrainConfig,
    pub out: PathBuf,
    pub data: DatasetPaths,
}

pub fn resolve(args: &CommonArgs) -> Result<Resolved> {
    let file = match &args.config {
        Some(p) => RunConfigFile::load(p)?,
        None => RunConfigFile::default(),
    };
    let mut t = file.training;
    if let Some(v) = args.seed {
        t.seed = v;
    }
    if let Some(v) = args.model {
        t.model = v;
    }
    if let Some(v) = args.epochs {
        t.epochs = v;
    }
    if let Some(v) = args.lr {
        t.lr = v;
    }
    if let Some(v) = args.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = args.window {
        t.window = v;
    }
    if let Some(v) = args.alpha {
        t.alpha = v;
    }
    if let Some(v) = args.rul_cap {
        t.rul_cap = Some(v);
    }
    t.validate()?;

    let dir = args
        .data_dir
        .clone()
        .or(file.data.dir)
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
    let mut data = DatasetPaths::in_dir(&dir);
    // Explicit per-file paths apply only when no directory flag overrides them.
    if args.data_dir.is_none() {
        if let Some(p) = file.data.train {
            data.train = p;
        }
        if let Some(p) = file.data.test {
            data.test = p;
        }
        if let Some(p) = file.data.rul {
            data.rul = p;
        }
    }
    let out = args
        .out
        .clone()
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    Ok(Resolved { train: t, out, data })
}

pub fn require_files(paths: &[&Path]) -> Result<()> {
    let missing: Vec<String> = paths
        .iter()
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        bail!("missing input file(s): {}", missing.join(", "));
    }
    Ok(())
}
