//! Post-hoc checks of a prepared training set against the raw trajectories it came from.

use std::collections::BTreeSet;

use crate::dataset::EngineTrajectory;
use crate::error::Result;
use crate::preprocess::{ewma_smooth, smooth_sensors, trim_head, PreparedTraining};

/// Tolerance for `inverse(transform(x)) == x`, relative to `max(1, |x|)`.
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> InvariantCheck {
    InvariantCheck { name, passed, detail }
}

/// EWMA properties on a few fixed series: a constant is a fixed point and
/// `alpha = 1` is the identity.
pub fn ewma_checks() -> Result<Vec<InvariantCheck>> {
    let constant = vec![3.25; 40];
    let ramp: Vec<f64> = (0..40).map(|t| (t as f64 * 0.37).sin() * 50.0 + 600.0).collect();
    let mut fixed_ok = true;
    for alpha in [0.1, 0.5, 1.0] {
        fixed_ok &= ewma_smooth(&constant, alpha)? == constant;
    }
    let identity_ok = ewma_smooth(&ramp, 1.0)? == ramp;
    Ok(vec![
        check("ewma_fixed_point", fixed_ok, "constant series unchanged for alpha in {0.1,0.5,1}".into()),
        check("ewma_identity", identity_ok, "alpha = 1 returns the input".into()),
    ])
}

/// Range, round-trip, split and sample-count checks for one prepared set.
pub fn preprocessing_checks(
    prep: &PreparedTraining,
    raw_train: &[EngineTrajectory],
    expected_val: usize,
) -> Result<Vec<InvariantCheck>> {
    let mut out = ewma_checks()?;

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for e in &prep.engines {
        for &v in e.features.data() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    out.push(check(
        "scaled_in_unit_interval",
        lo >= 0.0 && hi <= 1.0,
        format!("scaled training features span [{lo}, {hi}]"),
    ));

    let channels = prep.selection.kept_channels();
    let mut worst = 0.0f64;
    for (raw, e) in raw_train.iter().zip(&prep.engines) {
        let trimmed = trim_head(&smooth_sensors(raw, prep.config.alpha)?, prep.config.trim)?;
        for (r, rec) in trimmed.cycles.iter().enumerate() {
            let back = prep.scaler.inverse_row(e.features.row(r));
            for (k, &c) in channels.iter().enumerate() {
                let x = rec.channel(c);
                worst = worst.max((back[k] - x).abs() / x.abs().max(1.0));
            }
        }
    }
    out.push(check(
        "scaler_round_trip",
        worst <= ROUND_TRIP_TOLERANCE,
        format!("max relative round-trip error {worst:e}"),
    ));

    let all: BTreeSet<u32> = raw_train.iter().map(|t| t.engine_id).collect();
    let tr = &prep.split.training_engine_ids;
    let va = &prep.split.validation_engine_ids;
    let union: BTreeSet<u32> = tr.union(va).copied().collect();
    out.push(check(
        "split_disjoint_and_exhaustive",
        tr.is_disjoint(va) && union == all && va.len() == expected_val,
        format!("{} training / {} validation engines of {}", tr.len(), va.len(), all.len()),
    ));

    let w = prep.config.window;
    let expected: usize = raw_train
        .iter()
        .map(|t| t.len() - prep.config.trim - w + 1)
        .sum();
    let windows = prep.all_sequences()?;
    let contiguous = windows.iter().all(|s| {
        prep.engines
            .iter()
            .find(|e| e.engine_id == s.engine_id)
            .and_then(|e| e.cycles.iter().position(|&c| c == s.end_cycle))
            .is_some_and(|end| end + 1 >= w)
    });
    out.push(check(
        "window_count",
        windows.len() == expected && contiguous,
        format!("{} windows, expected {expected}", windows.len()),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_trajectory_file;
    use crate::preprocess::{prepare_training, PreprocessConfig};
    use crate::{synthetic, Execution};

    #[test]
    fn synthetic_fleet_satisfies_all() {
        let train = parse_trajectory_file(&synthetic::generate(25, 3).train).unwrap();
        let cfg = PreprocessConfig {
            n_val: 5,
            ..Default::default()
        };
        let prep = prepare_training(&cfg, &train, Execution::Sequential).unwrap();
        for c in preprocessing_checks(&prep, &train, 5).unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn wrong_split_size_is_reported() {
        let train = parse_trajectory_file(&synthetic::generate(10, 3).train).unwrap();
        let cfg = PreprocessConfig {
            n_val: 2,
            ..Default::default()
        };
        let prep = prepare_training(&cfg, &train, Execution::Sequential).unwrap();
        let checks = preprocessing_checks(&prep, &train, 3).unwrap();
        assert!(!checks.iter().find(|c| c.name == "split_disjoint_and_exhaustive").unwrap().passed);
    }
}
