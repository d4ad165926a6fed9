use proptest::prelude::*;

use rul_core::dataset::{parse_trajectory_file, serialize_trajectories, CycleRecord, EngineTrajectory};
use rul_core::gradcheck::gradient_check_suite;
use rul_core::models::ModelKind;
use rul_core::numerics::{Matrix, SeededRng};
use rul_core::optim::{AdamConfig, AdamState};
use rul_core::preprocess::{ewma_smooth, label_rul, split_by_engine, FeatureSelection, ScalerParams};

fn engines(max_engines: usize) -> impl Strategy<Value = Vec<EngineTrajectory>> {
    prop::collection::vec((1usize..6, -1e4f64..1e4), 1..max_engines).prop_map(|spec| {
        spec.into_iter()
            .enumerate()
            .map(|(i, (len, base))| EngineTrajectory {
                engine_id: i as u32 + 1,
                cycles: (0..len)
                    .map(|t| {
                        let mut sensors = [0.0; 21];
                        for (k, s) in sensors.iter_mut().enumerate() {
                            *s = base * (k as f64 + 1.0) / 7.0 + t as f64 / 3.0;
                        }
                        CycleRecord {
                            cycle: t as u32 + 1,
                            op_settings: [base / 1e3, -0.0003 * t as f64, 100.0],
                            sensors,
                        }
                    })
                    .collect(),
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn serialize_parse_round_trip(trajs in engines(6)) {
        let text = serialize_trajectories(&trajs);
        let back = parse_trajectory_file(&text).unwrap();
        prop_assert_eq!(&back, &trajs);
        let ids: Vec<u32> = back.iter().map(|t| t.engine_id).collect();
        prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(back.iter().all(|t| t.cycles.iter().enumerate().all(|(i, c)| c.cycle == i as u32 + 1)));
    }

    #[test]
    fn ewma_of_constant_is_constant(c in -1e6f64..1e6, n in 1usize..50, alpha in 0.01f64..=1.0) {
        let s = ewma_smooth(&vec![c; n], alpha).unwrap();
        prop_assert!(s.iter().all(|&v| v == c));
    }

    #[test]
    fn ewma_alpha_one_is_identity(xs in prop::collection::vec(-1e6f64..1e6, 1..50)) {
        prop_assert_eq!(ewma_smooth(&xs, 1.0).unwrap(), xs);
    }

    #[test]
    fn ewma_stays_within_input_range(xs in prop::collection::vec(-1e3f64..1e3, 1..60), alpha in 0.01f64..=1.0) {
        let s = ewma_smooth(&xs, alpha).unwrap();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(s[0], xs[0]);
        prop_assert!(s.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
    }

    #[test]
    fn split_is_disjoint_and_exhaustive(n in 2usize..150, frac in 0.0f64..0.9, seed: u64) {
        let ids: Vec<u32> = (1..=n as u32).collect();
        let n_val = ((n as f64) * frac) as usize;
        let s = split_by_engine(&ids, n_val, seed).unwrap();
        prop_assert_eq!(s.validation_engine_ids.len(), n_val);
        prop_assert!(s.training_engine_ids.is_disjoint(&s.validation_engine_ids));
        prop_assert_eq!(s.training_engine_ids.len() + n_val, n);
        prop_assert_eq!(split_by_engine(&ids, n_val, seed).unwrap(), s);
    }

    #[test]
    fn scaler_round_trip(vals in prop::collection::vec((-1e4f64..1e4, 1e-3f64..1e4, 0.0f64..=1.0), 1..12)) {
        let scaler = ScalerParams {
            feature_names: (0..vals.len()).map(|k| format!("f{k}")).collect(),
            min: vals.iter().map(|v| v.0).collect(),
            max: vals.iter().map(|v| v.0 + v.1).collect(),
        };
        let raw: Vec<f64> = vals.iter().map(|v| v.0 + v.2 * v.1).collect();
        let mut scaled = vec![0.0; raw.len()];
        scaler.transform_row(&raw, &mut scaled);
        prop_assert!(scaled.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let back = scaler.inverse_row(&scaled);
        for (a, b) in back.iter().zip(&raw) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn labels_decrease_by_one_and_respect_cap(len in 1u32..400, terminal in 0u32..150, cap in prop::option::of(1.0f64..200.0)) {
        let cycles: Vec<u32> = (1..=len).collect();
        let r = label_rul(&cycles, len, terminal, cap);
        prop_assert_eq!(r.len(), len as usize);
        for (i, &v) in r.iter().enumerate() {
            let raw = (len - cycles[i] + terminal) as f64;
            prop_assert_eq!(v, cap.map_or(raw, |c| raw.min(c)));
        }
    }

    #[test]
    fn matmul_associates_with_identity(r in 1usize..6, c in 1usize..6, seed: u64) {
        let mut rng = SeededRng::new(seed);
        let a = rng.uniform_matrix(-3.0, 3.0, r, c).unwrap();
        prop_assert_eq!(Matrix::identity(r).matmul(&a).unwrap(), a.clone());
        prop_assert_eq!(a.matmul(&Matrix::identity(c)).unwrap(), a);
    }

    #[test]
    fn adam_first_step_is_lr_sized(g in prop::collection::vec(-1e3f64..1e3, 1..10)) {
        use rul_core::models::{MlpParams, MlpSpec, ParamSet};
        let mut rng = SeededRng::new(3);
        let mut p = MlpParams::init(&MlpSpec::new(g.len(), vec![]), &mut rng).unwrap();
        let before = p.clone();
        let mut grads = p.zeros_like();
        grads.layers[0].weight.data_mut().copy_from_slice(&g);
        let mut opt = AdamState::new(&p, AdamConfig::default());
        opt.step(&mut p, &grads).unwrap();
        for (a, b) in p.layers[0].weight.data().iter().zip(before.layers[0].weight.data()) {
            prop_assert!((a - b).abs() <= 2.0 * AdamConfig::default().lr);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gradients_match_finite_differences(seed: u64) {
        for kind in [ModelKind::Mlp, ModelKind::Lstm] {
            let r = gradient_check_suite(kind, 3, seed, None).unwrap();
            prop_assert!(r.passed(), "{:?}", r);
        }
    }
}

#[test]
fn feature_names_follow_kept_channels() {
    let sel = FeatureSelection {
        dropped_sensors: [1, 5, 6, 10, 16, 18, 19].into_iter().collect(),
        dropped_settings: [3].into_iter().collect(),
    };
    assert_eq!(sel.kept_feature_count(), 16);
    let names = sel.feature_names();
    assert_eq!(names[0], "setting1");
    assert_eq!(names[2], "sensor2");
    assert_eq!(names.last().unwrap(), "sensor21");
}
