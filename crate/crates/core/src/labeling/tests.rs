use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::skeleton::{Aggregate, KinematicMetrics};

fn metrics(pairs: &[(&str, f64)]) -> KinematicMetrics {
    let mut m = KinematicMetrics::default();
    for (id, v) in pairs {
        m.aggregates.insert(
            id.to_string(),
            Aggregate {
                min: *v,
                max: *v,
                mean: *v,
            },
        );
    }
    m
}

fn squat(depth: f64, heel: f64, torso: f64) -> KinematicMetrics {
    metrics(&[
        ("femur_elevation_r", depth),
        ("heel_height_r", heel),
        ("torso_tibia_angle_r", torso),
    ])
}

/// F1 from explicit precision and recall.
fn brute_f1(rows: &[[u64; 3]; 3], c: usize) -> f64 {
    let tp = rows[c][c] as f64;
    let actual: u64 = rows[c].iter().sum();
    let predicted: u64 = (0..3).map(|i| rows[i][c]).sum();
    if actual == 0 && predicted == 0 {
        return 1.0;
    }
    let precision = if predicted == 0 {
        0.0
    } else {
        tp / predicted as f64
    };
    let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn cm3(rows: &[[u64; 3]; 3]) -> ConfusionMatrix {
    ConfusionMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn gm_f1_matches_brute_force_on_all_small_matrices() {
    let mut checked = 0;
    for code in 0..4u32.pow(9) {
        let mut rows = [[0u64; 3]; 3];
        let mut k = code;
        for cell in rows.iter_mut().flatten() {
            *cell = (k % 4) as u64;
            k /= 4;
        }
        let f1: Vec<f64> = (0..3).map(|c| brute_f1(&rows, c)).collect();
        let expected = (f1[0] * f1[1] * f1[2]).cbrt();
        let cm = cm3(&rows);
        let got = gm_f1(&cm).unwrap();
        assert!(
            (got - expected).abs() < 1e-12,
            "{rows:?}: {got} vs {expected}"
        );
        for (a, b) in cm.per_class_f1().iter().zip(&f1) {
            assert!((a - b).abs() < 1e-15);
        }
        checked += 1;
    }
    assert_eq!(checked, 262_144);
}

#[test]
fn gm_f1_of_half_point_eight_one() {
    // per-class F1 (0.5, 0.8, 1.0): class 3 absent from truth and assignments
    let cm = cm3(&[[1, 1, 0], [1, 4, 0], [0, 0, 0]]);
    let f1 = cm.per_class_f1();
    assert_eq!(f1[0], 0.5);
    assert_eq!(f1[1], 0.8);
    assert_eq!(f1[2], 1.0);
    let score = gm_f1(&cm).unwrap();
    assert!((score - 0.4f64.cbrt()).abs() < 1e-12);
    assert!((score - 0.7368).abs() < 5e-5);
    // same scores with class 3 present and perfectly recognized
    let cm = cm3(&[[1, 1, 0], [1, 4, 0], [0, 0, 5]]);
    assert_eq!(cm.per_class_f1(), vec![0.5, 0.8, 1.0]);
    assert!((gm_f1(&cm).unwrap() - 0.4f64.cbrt()).abs() < 1e-12);
}

#[test]
fn gm_f1_edge_cases() {
    assert_eq!(
        gm_f1(&cm3(&[[3, 0, 0], [0, 2, 0], [0, 0, 1]])).unwrap(),
        1.0
    );
    assert_eq!(
        gm_f1(&cm3(&[[0, 3, 0], [0, 2, 0], [0, 0, 1]])).unwrap(),
        0.0
    );
    assert!(gm_f1(&ConfusionMatrix::new(0)).is_err());
    assert_eq!(gm_f1(&ConfusionMatrix::new(3)).unwrap(), 1.0);
    assert!(ConfusionMatrix::from_rows(&[vec![1, 2], vec![3]]).is_err());
}

#[test]
fn macro_f1_all_predicted_as_two() {
    let cm = cm3(&[[0, 4, 0], [0, 4, 0], [0, 4, 0]]);
    assert_eq!(cm.per_class_f1(), vec![0.0, 0.5, 0.0]);
    assert!((cm.macro_f1() - 1.0 / 6.0).abs() < 1e-15);
    // classes absent from truth and predictions are left out of the mean
    let cm = cm3(&[[2, 0, 0], [0, 1, 0], [0, 0, 0]]);
    assert_eq!(cm.present_classes(), vec![0, 1]);
    assert_eq!(cm.macro_f1(), 1.0);
}

#[test]
fn label_range_and_serde() {
    assert!(Label::new(0).is_err());
    assert!(Label::new(4).is_err());
    let l = Label::new(2).unwrap();
    assert_eq!(l.index(), 1);
    assert_eq!(Label::from_index(1), l);
    assert_eq!(serde_json::to_string(&l).unwrap(), "2");
    assert!(serde_json::from_str::<Label>("5").is_err());
}

#[test]
fn squat_table_outcomes() {
    let rs = RuleSet::deep_squat();
    let a = assign_label(&squat(0.1, 0.0, 0.1), &rs).unwrap();
    assert_eq!(a.label.value(), 3);
    assert_eq!(a.outcomes, vec![true, true, true]);
    // heels elevated under an otherwise clean squat
    let a = assign_label(&squat(0.1, 0.05, 0.1), &rs).unwrap();
    assert_eq!(a.label.value(), 2);
    assert_eq!(a.outcomes, vec![true, false, true]);
    assert_eq!(
        assign_label(&squat(0.1, 0.0, 0.6), &rs)
            .unwrap()
            .label
            .value(),
        2
    );
    // depth failure dominates later rules
    assert_eq!(
        assign_label(&squat(-0.6, 0.05, 0.6), &rs)
            .unwrap()
            .label
            .value(),
        1
    );
}

#[test]
fn boundaries_are_inclusive() {
    let rs = RuleSet::deep_squat();
    let a = assign_label(&squat(-0.4, 0.02, 0.35), &rs).unwrap();
    assert_eq!(a.outcomes, vec![true, true, true]);
    assert_eq!(a.label.value(), 3);
    let below = assign_label(&squat(-0.4 - 1e-12, 0.02, 0.35), &rs).unwrap();
    assert_eq!(below.label.value(), 1);
}

#[test]
fn missing_metric_is_config_error() {
    let rs = RuleSet::deep_squat();
    let m = metrics(&[("femur_elevation_r", 0.1)]);
    match assign_label(&m, &rs) {
        Err(Error::Config(msg)) => assert!(msg.contains("heel_height_r"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn aggregate_selector_reads_the_right_statistic() {
    let mut frames = BTreeMap::new();
    frames.insert(
        "ankle_plantarflexion_r".to_string(),
        vec![0.0, 0.3, 0.0, 0.0],
    );
    frames.insert("pelvis_lateral".to_string(), vec![0.0; 4]);
    let m = KinematicMetrics::from_frames(frames);
    let mut rs = RuleSet::foot_drop();
    assert_eq!(assign_label(&m, &rs).unwrap().label.value(), 1);
    rs.criteria[0].aggregate = AggregateSelector::Mean;
    assert_eq!(assign_label(&m, &rs).unwrap().label.value(), 3);
}

#[test]
fn ruleset_validation() {
    let mut rs = RuleSet::foot_drop();
    rs.rules[0].when.insert("nope".into(), true);
    assert!(matches!(rs.validate(), Err(Error::Config(_))));
    let mut rs = RuleSet::foot_drop();
    rs.search_ranges.insert("foot_lifted".into(), [1.0, 0.0]);
    assert!(rs.validate().is_err());
    let mut rs = RuleSet::foot_drop();
    rs.criteria.push(rs.criteria[0].clone());
    assert!(rs.validate().is_err());
    let mut rs = RuleSet::foot_drop();
    rs.schema_version = 9;
    assert!(rs.validate().is_err());
}

#[test]
fn ruleset_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rs.json");
    let rs = RuleSet::deep_squat();
    rs.save(&path).unwrap();
    assert_eq!(RuleSet::load(&path).unwrap(), rs);
}

fn planted_corpus(n: usize, seed: u64) -> Vec<(KinematicMetrics, Label)> {
    use rand::{Rng, SeedableRng};
    let rs = RuleSet::deep_squat();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let m = squat(
                rng.random_range(-0.5..0.5),
                rng.random_range(0.0..0.08),
                rng.random_range(0.0..0.9),
            );
            let l = assign_label(&m, &rs).unwrap().label;
            (m, l)
        })
        .collect()
}

#[test]
fn self_labeled_corpus_scores_one() {
    let reps = planted_corpus(120, 1);
    let ev = evaluate_labeler(&RuleSet::deep_squat(), &reps).unwrap();
    assert_eq!(ev.gm_f1, 1.0);
    assert_eq!(ev.confusion.total(), 120);
}

#[test]
fn label_noise_lowers_agreement() {
    let rs = RuleSet::deep_squat();
    let mut reps = planted_corpus(200, 2);
    for (i, (_, l)) in reps.iter_mut().enumerate() {
        if i % 10 == 0 {
            *l = Label::from_index((l.index() + 1) % 3);
        }
    }
    let ev = evaluate_labeler(&rs, &reps).unwrap();
    assert!(ev.gm_f1 < 1.0);
}

#[test]
fn search_recovers_planted_thresholds() {
    let truth = RuleSet::deep_squat();
    let reps = planted_corpus(210, 3);
    let mut start = truth.clone();
    for c in &mut start.criteria {
        c.threshold = 0.5;
    }
    let res = optimize_thresholds(&start, &reps, 20_000, 7).unwrap();
    assert!(res.score >= 0.95, "score {}", res.score);
    let ev = evaluate_labeler(&res.apply(&start), &reps).unwrap();
    assert_eq!(ev.gm_f1, res.score);
}

#[test]
fn search_budget_one_is_that_sample() {
    let rs = RuleSet::deep_squat();
    let reps = planted_corpus(50, 4);
    let res = optimize_thresholds(&rs, &reps, 1, 11).unwrap();
    assert_eq!(res.best_index, 0);
    assert_eq!(res.improvements.len(), 1);
    let ev = evaluate_labeler(&res.apply(&rs), &reps).unwrap();
    assert_eq!(ev.gm_f1, res.score);
    for (id, t) in &res.thresholds {
        let [lo, hi] = res.ranges[id];
        assert!(*t >= lo && *t <= hi);
    }
}

#[test]
fn search_errors() {
    let rs = RuleSet::deep_squat();
    assert!(optimize_thresholds(&rs, &[], 10, 0).is_err());
    let reps = planted_corpus(5, 0);
    assert!(matches!(
        optimize_thresholds(&rs, &reps, 0, 0),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn search_uses_observed_range_without_explicit_one() {
    let mut rs = RuleSet::deep_squat();
    rs.search_ranges.clear();
    let reps = planted_corpus(40, 5);
    let res = optimize_thresholds(&rs, &reps, 50, 1).unwrap();
    let depths: Vec<f64> = reps
        .iter()
        .map(|(m, _)| m.aggregate("femur_elevation_r").unwrap().max)
        .collect();
    let lo = depths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = depths.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(res.ranges["depth"], [lo, hi]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gm_f1_is_permutation_invariant(cells in prop::collection::vec(0u64..20, 9), perm in 0usize..6) {
        let perms = [[0,1,2],[0,2,1],[1,0,2],[1,2,0],[2,0,1],[2,1,0]];
        let p = perms[perm];
        let mut rows = [[0u64; 3]; 3];
        let mut permuted = [[0u64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rows[i][j] = cells[i * 3 + j];
                permuted[p[i]][p[j]] = cells[i * 3 + j];
            }
        }
        let a = gm_f1(&cm3(&rows)).unwrap();
        let b = gm_f1(&cm3(&permuted)).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn search_is_deterministic_and_monotone(seed in any::<u64>(), budget in 1u64..200) {
        let rs = RuleSet::deep_squat();
        let reps = planted_corpus(30, 9);
        let a = optimize_thresholds(&rs, &reps, budget, seed).unwrap();
        let b = optimize_thresholds(&rs, &reps, budget, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let doubled = optimize_thresholds(&rs, &reps, budget * 2, seed).unwrap();
        prop_assert!(doubled.score >= a.score);
        // the running maximum: improvements strictly increase and end at the score
        let last = a.improvements.last().unwrap();
        prop_assert_eq!(last.1, a.score);
        prop_assert_eq!(last.0, a.best_index);
        prop_assert!(a.improvements.windows(2).all(|w| w[0].1 < w[1].1 && w[0].0 < w[1].0));
        prop_assert_eq!(&doubled.improvements[..a.improvements.len()], &a.improvements[..]);
    }

    #[test]
    fn assign_label_is_pure(d in -1.0f64..1.0, h in 0.0f64..0.1, t in 0.0f64..1.0) {
        let rs = RuleSet::deep_squat();
        let m = squat(d, h, t);
        prop_assert_eq!(assign_label(&m, &rs).unwrap(), assign_label(&m, &rs).unwrap());
    }
}
