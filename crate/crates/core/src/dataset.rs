//! Readers for the C-MAPSS text files.
//!
//! Trajectory files carry 26 whitespace-separated columns per row:
//! unit id, cycle, three operating settings, sensors 1–21. The RUL file
//! carries one integer per line, the i-th belonging to the i-th test engine.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_SETTINGS: usize = 3;
pub const N_SENSORS: usize = 21;
pub const N_COLUMNS: usize = 2 + N_SETTINGS + N_SENSORS;

pub const TRAIN_FILE: &str = "train_FD001.txt";
pub const TEST_FILE: &str = "test_FD001.txt";
pub const RUL_FILE: &str = "RUL_FD001.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: u32,
    pub op_settings: [f64; N_SETTINGS],
    pub sensors: [f64; N_SENSORS],
}

impl CycleRecord {
    /// Raw channel value; channels 0..3 are settings, 3..24 are sensors 1..21.
    pub fn channel(&self, idx: usize) -> f64 {
        if idx < N_SETTINGS {
            self.op_settings[idx]
        } else {
            self.sensors[idx - N_SETTINGS]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineTrajectory {
    pub engine_id: u32,
    pub cycles: Vec<CycleRecord>,
}

impl EngineTrajectory {
    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    pub fn last_cycle(&self) -> u32 {
        self.cycles.last().map_or(0, |c| c.cycle)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulLabelFile {
    pub ruls: Vec<u32>,
}

fn parse_int(tok: &str, line: usize, what: &str) -> Result<u32> {
    // Some exports write integer columns as "1.0"; accept those when exact.
    if let Ok(v) = tok.parse::<u32>() {
        return Ok(v);
    }
    match tok.parse::<f64>() {
        Ok(f) if f.fract() == 0.0 && f >= 0.0 && f <= u32::MAX as f64 => Ok(f as u32),
        _ => Err(Error::Parse {
            line,
            message: format!("{what}: expected a non-negative integer, got `{tok}`"),
        }),
    }
}

fn parse_real(tok: &str, line: usize, col: usize) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            message: format!("column {}: expected a finite number, got `{tok}`", col + 1),
        }),
    }
}

/// Parses a `train_*`/`test_*` file into per-engine trajectories ordered by unit id.
pub fn parse_trajectory_file(text: &str) -> Result<Vec<EngineTrajectory>> {
    let mut engines: BTreeMap<u32, Vec<CycleRecord>> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() != N_COLUMNS {
            return Err(Error::Parse {
                line,
                message: format!("expected {N_COLUMNS} columns, found {}", toks.len()),
            });
        }
        let unit = parse_int(toks[0], line, "unit id")?;
        if unit == 0 {
            return Err(Error::Parse {
                line,
                message: "unit id must be positive".into(),
            });
        }
        let cycle = parse_int(toks[1], line, "cycle")?;
        let mut op_settings = [0.0; N_SETTINGS];
        for (k, v) in op_settings.iter_mut().enumerate() {
            *v = parse_real(toks[2 + k], line, 2 + k)?;
        }
        let mut sensors = [0.0; N_SENSORS];
        for (k, v) in sensors.iter_mut().enumerate() {
            *v = parse_real(toks[2 + N_SETTINGS + k], line, 2 + N_SETTINGS + k)?;
        }
        engines.entry(unit).or_default().push(CycleRecord {
            cycle,
            op_settings,
            sensors,
        });
    }

    let mut out = Vec::with_capacity(engines.len());
    for (engine_id, cycles) in engines {
        for (k, rec) in cycles.iter().enumerate() {
            if rec.cycle as usize != k + 1 {
                return Err(Error::Validation(format!(
                    "engine {engine_id}: cycles must be contiguous from 1, found cycle {} at position {}",
                    rec.cycle,
                    k + 1
                )));
            }
        }
        out.push(EngineTrajectory { engine_id, cycles });
    }
    Ok(out)
}

/// Emits trajectories in the same whitespace format the parser reads.
/// Reals use shortest round-trip formatting, so parsing the output is exact.
pub fn serialize_trajectories(trajectories: &[EngineTrajectory]) -> String {
    let mut s = String::new();
    for t in trajectories {
        for c in &t.cycles {
            let _ = write!(s, "{} {}", t.engine_id, c.cycle);
            for v in c.op_settings.iter().chain(&c.sensors) {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
    }
    s
}

pub fn parse_rul_file(text: &str) -> Result<RulLabelFile> {
    let mut ruls = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let tok = raw.trim();
        if tok.is_empty() {
            continue;
        }
        ruls.push(parse_int(tok, i + 1, "RUL")?);
    }
    if ruls.is_empty() {
        return Err(Error::Validation("RUL file contains no labels".into()));
    }
    Ok(RulLabelFile { ruls })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub train_engines: usize,
    pub test_engines: usize,
    pub label_count: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_min_len: usize,
    pub train_max_len: usize,
    pub test_min_len: usize,
    pub test_max_len: usize,
    /// Departures from the published FD001 shape. Empty when the inputs match.
    pub flags: Vec<String>,
}

/// Expected FD001 engine/label counts.
pub const FD001_ENGINES: usize = 100;
/// Shortest test trajectory that still yields a full window after the default trim.
pub const FD001_MIN_TEST_LEN: usize = 30;

pub fn dataset_summary(
    train: &[EngineTrajectory],
    test: &[EngineTrajectory],
    ruls: &RulLabelFile,
) -> DatasetStats {
    let lens = |ts: &[EngineTrajectory]| -> (usize, usize, usize) {
        let total = ts.iter().map(EngineTrajectory::len).sum();
        let min = ts.iter().map(EngineTrajectory::len).min().unwrap_or(0);
        let max = ts.iter().map(EngineTrajectory::len).max().unwrap_or(0);
        (total, min, max)
    };
    let (train_rows, train_min_len, train_max_len) = lens(train);
    let (test_rows, test_min_len, test_max_len) = lens(test);

    let mut flags = Vec::new();
    if train.len() != FD001_ENGINES {
        flags.push(format!("expected {FD001_ENGINES} training engines, found {}", train.len()));
    }
    if test.len() != FD001_ENGINES {
        flags.push(format!("expected {FD001_ENGINES} test engines, found {}", test.len()));
    }
    if ruls.ruls.len() != test.len() {
        flags.push(format!(
            "{} RUL labels for {} test engines",
            ruls.ruls.len(),
            test.len()
        ));
    }
    if test_min_len < FD001_MIN_TEST_LEN {
        flags.push(format!(
            "shortest test engine has {test_min_len} cycles (< {FD001_MIN_TEST_LEN}); padding policy will apply"
        ));
    }

    DatasetStats {
        train_engines: train.len(),
        test_engines: test.len(),
        label_count: ruls.ruls.len(),
        train_rows,
        test_rows,
        train_min_len,
        train_max_len,
        test_min_len,
        test_max_len,
        flags,
    }
}

/// The three FD001 files, parsed.
#[derive(Debug, Clone)]
pub struct Fd001 {
    pub train: Vec<EngineTrajectory>,
    pub test: Vec<EngineTrajectory>,
    pub ruls: RulLabelFile,
}

#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub train: PathBuf,
    pub test: PathBuf,
    pub rul: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            train: dir.join(TRAIN_FILE),
            test: dir.join(TEST_FILE),
            rul: dir.join(RUL_FILE),
        }
    }

    pub fn missing(&self) -> Vec<&Path> {
        [&self.train, &self.test, &self.rul]
            .into_iter()
            .map(PathBuf::as_path)
            .filter(|p| !p.is_file())
            .collect()
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        Error::Validation(m) => Error::Validation(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn load(paths: &DatasetPaths) -> Result<Fd001> {
    let train = with_path(&paths.train, parse_trajectory_file(&read(&paths.train)?))?;
    let test = with_path(&paths.test, parse_trajectory_file(&read(&paths.test)?))?;
    let ruls = with_path(&paths.rul, parse_rul_file(&read(&paths.rul)?))?;
    if ruls.ruls.len() != test.len() {
        return Err(Error::Validation(format!(
            "{} RUL labels for {} test engines",
            ruls.ruls.len(),
            test.len()
        )));
    }
    Ok(Fd001 { train, test, ruls })
}
