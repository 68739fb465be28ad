mod common;

use common::*;
use embias::analysis::{
    compare_groups, compare_model_groups, count_biases, layer_profile, threshold_sweep,
    AnalysisError, DetectionMatrix, EntryKey, GroupTestConfig, ThresholdGrid,
};
use embias::stats::SamplingMode;
use proptest::prelude::*;
use rand::Rng;

fn curves(max_models: usize, points: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0usize..6, points), 1..=max_models).prop_map(
        |mut v| {
            // count curves are non-decreasing in the threshold
            for c in &mut v {
                for j in 1..c.len() {
                    c[j] += c[j - 1];
                }
            }
            v
        },
    )
}

fn grid(points: usize) -> ThresholdGrid {
    ThresholdGrid::linear(0.01, 0.1, points).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn group_test_matches_enumeration_oracle(a in curves(5, 4), b in curves(5, 4)) {
        let out = compare_groups(&a, &b, &grid(4), &GroupTestConfig::default()).unwrap();
        let oracle = brute_force_groups(&a, &b);
        prop_assert_eq!(out.mode, SamplingMode::Exact);
        for (j, (delta, greater, equal)) in oracle.iter().enumerate() {
            prop_assert_eq!(out.delta_orig[j], *delta);
            prop_assert!(rel_close(out.exceedance[j], *greater, 1e-12));
            prop_assert!(rel_close(out.ties[j], *equal, 1e-12));
        }
        let p = oracle.iter().map(|o| o.1).sum::<f64>() / oracle.len() as f64;
        prop_assert!((out.p_value - p).abs() <= 1e-12);
    }

    #[test]
    fn group_test_is_antisymmetric(a in curves(5, 5), b in curves(5, 5)) {
        let cfg = GroupTestConfig::default();
        let ab = compare_groups(&a, &b, &grid(5), &cfg).unwrap();
        let ba = compare_groups(&b, &a, &grid(5), &cfg).unwrap();
        for j in 0..5 {
            prop_assert_eq!(ab.delta_orig[j], -ba.delta_orig[j]);
            prop_assert_eq!(ab.ties[j], ba.ties[j]);
            prop_assert!((ab.exceedance[j] + ba.exceedance[j] + ab.ties[j] - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn full_enumeration_uses_252_splits() {
    let a = vec![vec![10usize]; 5];
    let b = vec![vec![1usize]; 5];
    let out = compare_groups(&a, &b, &grid(1), &GroupTestConfig::default()).unwrap();
    assert_eq!(out.n_group_permutations, 252);
    assert_eq!(out.delta_orig, vec![45]);
    // only the identity split reaches 45, and ties are not exceedances
    assert_eq!(out.p_value, 0.0);
    assert_eq!(out.ties, vec![1.0 / 252.0]);
}

#[test]
fn all_equal_counts_are_pure_ties() {
    let a = vec![vec![3usize, 3]; 5];
    let out = compare_groups(&a, &a, &grid(2), &GroupTestConfig::default()).unwrap();
    assert_eq!(out.tie_fraction, 1.0);
    assert_eq!(out.p_value, 0.0);
}

#[test]
fn identical_count_vectors_are_centred() {
    let a: Vec<Vec<usize>> = (0..5).map(|i| vec![i, 2 * i]).collect();
    let out = compare_groups(&a, &a, &grid(2), &GroupTestConfig::default()).unwrap();
    assert_eq!(out.delta_orig, vec![0, 0]);
    assert!((out.p_value + 0.5 * out.tie_fraction - 0.5).abs() < 1e-12);
}

#[test]
fn large_groups_fall_back_to_seeded_sampling() {
    let mut r = rng(5);
    let a: Vec<Vec<usize>> = (0..14).map(|_| vec![r.random_range(0..10)]).collect();
    let b: Vec<Vec<usize>> = (0..14).map(|_| vec![r.random_range(0..10)]).collect();
    let cfg = GroupTestConfig::default();
    let one = compare_groups(&a, &b, &grid(1), &cfg).unwrap();
    let two = compare_groups(&a, &b, &grid(1), &cfg).unwrap();
    assert_eq!(one.mode, SamplingMode::MonteCarlo);
    assert_eq!(one.n_group_permutations, cfg.monte_carlo_draws);
    assert_eq!(one, two);
}

#[test]
fn comparison_is_stable_under_grid_refinement() {
    let mut r = rng(11);
    for _ in 0..20 {
        let models: Vec<(String, Vec<_>)> = (0..10)
            .map(|i| {
                let k = r.random_range(0..=12);
                (format!("m{i}"), model_outcomes(&mut r, 39, k))
            })
            .collect();
        let m = matrix_from_models("L", &models);
        let ga: Vec<String> = (0..5).map(|i| format!("m{i}")).collect();
        let gb: Vec<String> = (5..10).map(|i| format!("m{i}")).collect();
        let cfg = GroupTestConfig::default();
        let coarse = ThresholdGrid::uniform_to_tenth(1000).unwrap();
        let fine = ThresholdGrid::uniform_to_tenth(2000).unwrap();
        let p1 = compare_model_groups(&m, "L", &ga, &gb, &coarse, &cfg)
            .unwrap()
            .p_value;
        let p2 = compare_model_groups(&m, "L", &ga, &gb, &fine, &cfg)
            .unwrap()
            .p_value;
        assert!((p1 - p2).abs() < 0.005, "{p1} vs {p2}");
    }
}

#[test]
fn overlapping_groups_are_rejected() {
    let models = vec![
        ("m0".to_string(), vec![outcome(0.001, 1.0)]),
        ("m1".to_string(), vec![outcome(0.5, 0.1)]),
    ];
    let m = matrix_from_models("L", &models);
    let grid = ThresholdGrid::default_comparison();
    let err = compare_model_groups(
        &m,
        "L",
        &["m0".into()],
        &["m0".into(), "m1".into()],
        &grid,
        &GroupTestConfig::default(),
    );
    assert!(matches!(err, Err(AnalysisError::InvalidGroups(_))));
    let err = compare_model_groups(
        &m,
        "L",
        &["m0".into()],
        &["nope".into()],
        &grid,
        &GroupTestConfig::default(),
    );
    assert!(matches!(err, Err(AnalysisError::UnknownModel(_))));
}

#[test]
fn planted_last_layer_detections_show_only_there() {
    let layers: Vec<String> = (0..4).map(|l| format!("l{l}")).collect();
    let mut m = DetectionMatrix::new(layers.clone());
    for (li, layer) in layers.iter().enumerate() {
        for t in 0..10 {
            let p = if li == 3 && t < 6 { 1e-4 } else { 0.4 };
            m.insert(
                EntryKey::new("m", layer.clone(), format!("t{t}")),
                outcome(p, 1.5),
            )
            .unwrap();
        }
    }
    let profile = layer_profile(&m, "m", 0.01).unwrap();
    let counts: Vec<usize> = profile.layers.iter().map(|s| s.bias_count).collect();
    let strengths: Vec<f64> = profile
        .layers
        .iter()
        .map(|s| s.cumulative_strength)
        .collect();
    assert_eq!(counts, vec![0, 0, 0, 6]);
    assert_eq!(strengths, vec![0.0, 0.0, 0.0, 9.0]);
    assert_eq!(
        profile
            .layers
            .iter()
            .map(|s| s.layer.as_str())
            .collect::<Vec<_>>(),
        ["l0", "l1", "l2", "l3"]
    );
}

#[test]
fn thresholds_are_strict_and_validated() {
    let outs = [outcome(0.01, 1.0), outcome(0.0099, 1.0)];
    assert_eq!(count_biases(&outs, 0.01).unwrap(), 1);
    for bad in [0.0, 1.0, -0.5, f64::NAN] {
        assert!(matches!(
            count_biases(&outs, bad),
            Err(AnalysisError::InvalidThreshold(_))
        ));
    }
    assert!(ThresholdGrid::new(vec![0.01, 1.0]).is_err());
    assert!(ThresholdGrid::new(vec![0.02, 0.01]).is_err());
    assert!(ThresholdGrid::new(vec![]).is_err());
}

#[test]
fn unknown_layer_is_an_error() {
    let m = matrix_from_models("L", &[("m".to_string(), vec![outcome(0.2, 0.0)])]);
    let err = threshold_sweep(&m, "other", &ThresholdGrid::default_sweep());
    assert!(matches!(err, Err(AnalysisError::UnknownLayer(_))));
}

#[test]
fn default_grids_have_expected_shape() {
    let sweep = ThresholdGrid::default_sweep();
    assert_eq!(sweep.len(), 31);
    assert!((sweep.values()[0] - 1e-4).abs() < 1e-18);
    assert!((sweep.values()[30] - 0.1).abs() < 1e-15);
    let ratio = sweep.values()[1] / sweep.values()[0];
    for w in sweep.values().windows(2) {
        assert!((w[1] / w[0] - ratio).abs() < 1e-9);
    }
    let cmp = ThresholdGrid::default_comparison();
    assert_eq!(cmp.len(), 1000);
    assert!((cmp.values()[999] - 0.1).abs() < 1e-15);
}
