//! Run-to-failure fleets in the FD001 text layout.
//!
//! Used by tests, benches and smoke runs when the real files are not at hand.
//! The channel layout mirrors FD001: setting 3 is pinned at 100, sensors
//! 1, 5, 10, 16, 18, 19 are constant, sensor 6 flickers between two levels,
//! and the remaining sensors drift with an exponential wear index plus noise.

use std::fmt::Write as _;

use crate::dataset::N_SENSORS;
use crate::numerics::SeededRng;

/// Baseline level, wear sensitivity and noise scale per sensor (1-based order).
const SENSORS: [(f64, f64, f64); N_SENSORS] = [
    (518.67, 0.0, 0.0),
    (642.0, 1.2, 0.35),
    (1585.0, 12.0, 4.5),
    (1398.0, 18.0, 6.0),
    (14.62, 0.0, 0.0),
    (21.61, 0.0, 0.0),
    (553.9, -2.0, 0.6),
    (2388.05, 0.15, 0.05),
    (9050.0, 40.0, 15.0),
    (1.3, 0.0, 0.0),
    (47.3, 0.8, 0.2),
    (521.9, -1.8, 0.5),
    (2388.05, 0.15, 0.05),
    (8140.0, 30.0, 12.0),
    (8.42, 0.09, 0.03),
    (0.03, 0.0, 0.0),
    (392.0, 4.0, 1.3),
    (2388.0, 0.0, 0.0),
    (100.0, 0.0, 0.0),
    (38.85, -0.5, 0.15),
    (23.31, -0.3, 0.09),
];

#[derive(Debug, Clone)]
pub struct SyntheticFleet {
    pub train: String,
    pub test: String,
    pub rul: String,
}

impl SyntheticFleet {
    pub fn write_to(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(crate::dataset::TRAIN_FILE), &self.train)?;
        std::fs::write(dir.join(crate::dataset::TEST_FILE), &self.test)?;
        std::fs::write(dir.join(crate::dataset::RUL_FILE), &self.rul)
    }
}

fn normal(rng: &mut SeededRng) -> f64 {
    let u1 = 1.0 - rng.next_f64();
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let p = 10f64.powi(decimals);
    (x * p).round() / p
}

fn emit_engine(out: &mut String, rng: &mut SeededRng, id: usize, life: usize, stop: usize) {
    let onset = 0.25 + 0.25 * rng.next_f64();
    let severity = 0.8 + 0.4 * rng.next_f64();
    let offsets: Vec<f64> = SENSORS.iter().map(|&(_, _, sd)| 0.5 * sd * normal(rng)).collect();
    for t in 1..=stop {
        let frac = t as f64 / life as f64;
        let wear = if frac <= onset {
            0.0
        } else {
            let z = (frac - onset) / (1.0 - onset);
            severity * ((3.0 * z).exp() - 1.0) / (3f64.exp() - 1.0)
        };
        let s1 = round_to(0.002 * normal(rng), 4);
        let s2 = round_to(0.0003 * normal(rng), 4);
        let _ = write!(out, "{id} {t} {s1} {s2} 100.0");
        for (k, &(base, sens, sd)) in SENSORS.iter().enumerate() {
            let v = if k == 5 {
                if rng.next_f64() < 0.02 { 21.60 } else { 21.61 }
            } else if sd == 0.0 {
                base
            } else {
                round_to(base + offsets[k] + sens * 3.0 * wear + sd * normal(rng), 4)
            };
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
}

/// `engines` training and test engines with lifetimes in 128..=362 cycles.
/// Test engines stop between 31 cycles and 10 cycles before failure.
pub fn generate(engines: usize, seed: u64) -> SyntheticFleet {
    let mut rng = SeededRng::with_stream(seed, 7);
    let mut train = String::new();
    let mut test = String::new();
    let mut rul = String::new();
    for id in 1..=engines {
        let life = 128 + rng.below(235) as usize;
        emit_engine(&mut train, &mut rng, id, life, life);
    }
    for id in 1..=engines {
        let life = 128 + rng.below(235) as usize;
        let stop = 31 + rng.below((life - 10 - 31) as u64) as usize;
        emit_engine(&mut test, &mut rng, id, life, stop);
        let _ = writeln!(rul, "{}", life - stop);
    }
    SyntheticFleet { train, test, rul }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_rul_file, parse_trajectory_file};
    use crate::preprocess::{detect_constant_sensors, detect_constant_settings, DEFAULT_DROPPED_SENSORS};

    #[test]
    fn fleet_parses_and_has_fd001_channel_layout() {
        let f = generate(8, 1);
        let train = parse_trajectory_file(&f.train).unwrap();
        let test = parse_trajectory_file(&f.test).unwrap();
        let ruls = parse_rul_file(&f.rul).unwrap();
        assert_eq!((train.len(), test.len(), ruls.ruls.len()), (8, 8, 8));
        assert!(test.iter().all(|t| t.len() >= 31));
        assert_eq!(
            detect_constant_sensors(&train).into_iter().collect::<Vec<_>>(),
            DEFAULT_DROPPED_SENSORS.to_vec()
        );
        assert_eq!(detect_constant_settings(&train).into_iter().collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(3, 5).train, generate(3, 5).train);
        assert_ne!(generate(3, 5).train, generate(3, 6).train);
    }
}
