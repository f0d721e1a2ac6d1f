use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::augmentation::{estimate_distributions, generate_set, GenerationConfig};
use crate::labeling::RuleSet;
use crate::rotation::{euler_to_quat, EulerAngles, ImuSample};

fn track(id: &str, phase: f64, n: usize) -> OrientationTrajectory {
    let samples = (0..n)
        .map(|i| euler_to_quat(EulerAngles::new(phase + 0.01 * i as f64, 0.2, -0.1)).unwrap())
        .collect();
    OrientationTrajectory::new(id, 30.0, samples).unwrap()
}

fn rep(id: &str, subject: &str, label: u8) -> Repetition {
    Repetition::new(
        id,
        subject,
        "ex",
        Label::new(label).unwrap(),
        vec![track("a", 0.1, 8), track("b", -0.3, 8)],
    )
    .unwrap()
}

fn grid(subjects: usize, per_class: [usize; 3]) -> Vec<Repetition> {
    let mut out = Vec::new();
    for s in 0..subjects {
        for (c, &n) in per_class.iter().enumerate() {
            for k in 0..n {
                out.push(rep(
                    &format!("s{s}-c{}-{k}", c + 1),
                    &format!("s{s}"),
                    c as u8 + 1,
                ));
            }
        }
    }
    out
}

#[test]
fn repetition_rejects_mismatched_trajectories() {
    let l = Label::new(1).unwrap();
    assert!(Repetition::new(
        "r",
        "s",
        "ex",
        l,
        vec![track("a", 0.0, 8), track("b", 0.0, 9)]
    )
    .is_err());
    assert!(Repetition::new(
        "r",
        "s",
        "ex",
        l,
        vec![track("a", 0.0, 8), track("a", 0.0, 8)]
    )
    .is_err());
    let other_rate =
        OrientationTrajectory::new("b", 60.0, track("b", 0.0, 8).samples().to_vec()).unwrap();
    assert!(Repetition::new("r", "s", "ex", l, vec![track("a", 0.0, 8), other_rate]).is_err());
}

#[test]
fn input_matrix_layout() {
    let r = rep("r", "s", 2);
    let (m, label) = build_input_matrix(&r, 16).unwrap();
    assert_eq!((m.rows, m.cols), (8, 16));
    assert_eq!(label.value(), 2);
    let first = r.trajectories()[1].first().to_array();
    for k in 0..4 {
        assert!((m.get(4 + k, 0) - first[k]).abs() < 1e-12);
    }
    let last = r.trajectories()[0].samples().last().unwrap().to_array();
    for k in 0..4 {
        assert!((m.get(k, 15) - last[k]).abs() < 1e-12);
    }
    let reordered = reorder_segments(&r, &["b", "a"]).unwrap();
    let (m2, _) = build_input_matrix(&reordered, 16).unwrap();
    assert_eq!(m2.row(0), m.row(4));
    assert!(reorder_segments(&r, &["a", "c"]).is_err());
}

#[test]
fn oversampling_balances_classes() {
    let labels: Vec<Label> = [1, 1, 1, 1, 1, 2, 2, 3]
        .iter()
        .map(|&v| Label::new(v).unwrap())
        .collect();
    let idx = oversample_indices(&labels, 3).unwrap();
    assert_eq!(&idx[..8], &[0, 1, 2, 3, 4, 5, 6, 7]);
    assert_eq!(class_counts(idx.iter().map(|&i| labels[i])), [5, 5, 5]);
    assert_eq!(idx, oversample_indices(&labels, 3).unwrap());
    assert!(oversample_indices(&labels[..7], 3).is_err());
}

#[test]
fn kfold_partitions_and_stratifies() {
    let reps = grid(4, [3, 4, 5]);
    let plans = stratified_kfold(&reps, 3, 11).unwrap();
    let all: BTreeSet<&str> = reps.iter().map(|r| r.id.as_str()).collect();
    let mut tested = BTreeSet::new();
    for plan in &plans {
        let mut seen = BTreeSet::new();
        for side in [Side::Train, Side::Validation, Side::Test] {
            for id in plan.side(side) {
                assert!(seen.insert(id.as_str()), "{id} on two sides");
            }
        }
        assert_eq!(seen, all);
        for id in &plan.test {
            assert!(tested.insert(id.clone()));
        }
        assert!(plan.flagged_subjects.is_empty());
        audit_leakage(plan, &reps, &[]).unwrap();
        // each class gets validation members
        let val: Vec<&Repetition> = plan
            .validation
            .iter()
            .map(|id| reps.iter().find(|r| &r.id == id).unwrap())
            .collect();
        assert!(class_counts(val.iter().map(|r| r.label))
            .iter()
            .all(|&c| c >= 1));
    }
    assert_eq!(tested.len(), reps.len());
    let sizes: Vec<usize> = plans.iter().map(|p| p.test.len()).collect();
    assert!(
        sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1,
        "{sizes:?}"
    );
    assert_eq!(plans, stratified_kfold(&reps, 3, 11).unwrap());
}

#[test]
fn kfold_flags_small_subjects() {
    let mut reps = grid(3, [2, 2, 2]);
    reps.push(rep("tiny-1", "tiny", 1));
    let plans = stratified_kfold(&reps, 5, 0).unwrap();
    assert_eq!(plans[0].flagged_subjects, vec!["tiny".to_string()]);
    assert!(stratified_kfold(&reps, 1, 0).is_err());
    assert!(stratified_kfold(&reps[..3], 4, 0).is_err());
    let mut dup = reps.clone();
    dup.push(reps[0].clone());
    assert!(stratified_kfold(&dup, 3, 0).is_err());
}

#[test]
fn loso_holds_out_each_subject() {
    let reps = grid(4, [2, 2, 2]);
    let plans = loso_split(&reps, 5).unwrap();
    assert_eq!(plans.len(), 4);
    for plan in &plans {
        let held = plan.held_out_subject().unwrap();
        assert!(plan.test.iter().all(|id| id.starts_with(held)));
        assert!(plan
            .train
            .iter()
            .chain(&plan.validation)
            .all(|id| !id.starts_with(held)));
        assert_eq!(plan.test.len(), 6);
        audit_leakage(plan, &reps, &[]).unwrap();
    }
    assert!(loso_split(&grid(1, [2, 2, 2]), 0).is_err());
}

#[test]
fn audit_detects_planted_leaks() {
    let reps = grid(3, [2, 2, 2]);
    let plan = loso_split(&reps, 1).unwrap().remove(0);
    let mut bad = plan.clone();
    let moved = bad.test.pop().unwrap();
    bad.train.push(moved.clone());
    match audit_leakage(&bad, &reps, &[]) {
        Err(e @ Error::Leakage { .. }) => {
            assert!(e.is_invariant_violation());
            if let Error::Leakage { ids } = e {
                assert_eq!(ids, vec![moved]);
            }
        }
        other => panic!("expected leakage, got {other:?}"),
    }

    let mut dup = plan.clone();
    dup.validation.push(dup.train[0].clone());
    assert!(matches!(
        audit_leakage(&dup, &reps, &[]),
        Err(Error::Leakage { .. })
    ));
}

#[test]
fn audit_checks_augmented_provenance() {
    let spec = CorpusSpec::foot_drop();
    let model = spec.skeletal_model().unwrap();
    let rs = RuleSet::foot_drop();
    let reps = synthesize_corpus(&model, &rs, &spec, 21, 8).unwrap();
    let plan = loso_split(&reps, 2).unwrap().remove(0);
    let train: Vec<Repetition> = plan
        .train
        .iter()
        .map(|id| reps.iter().find(|r| &r.id == id).unwrap().clone())
        .collect();
    let dists = estimate_distributions(&reps).unwrap();
    let (aug, _) = generate_set(
        &train[..2],
        &dists,
        &model,
        &rs,
        &GenerationConfig::new(1, 3),
    )
    .unwrap();
    assert!(!aug.is_empty());
    let ok: Vec<(Side, &Repetition)> = aug.iter().map(|r| (Side::Train, r)).collect();
    audit_leakage(&plan, &reps, &ok).unwrap();

    let wrong_side: Vec<(Side, &Repetition)> = aug.iter().map(|r| (Side::Validation, r)).collect();
    match audit_leakage(&plan, &reps, &wrong_side) {
        Err(Error::Leakage { ids }) => assert_eq!(ids.len(), aug.len()),
        other => panic!("{other:?}"),
    }
    let mut orphan = aug[0].clone();
    orphan.provenance = None;
    assert!(audit_leakage(&plan, &reps, &[(Side::Train, &orphan)]).is_err());
}

#[test]
fn dataset_round_trip_is_lossless() {
    let spec = CorpusSpec::foot_drop();
    let model = spec.skeletal_model().unwrap();
    let reps = synthesize_corpus(&model, &RuleSet::foot_drop(), &spec, 7, 1).unwrap();
    let ds = Dataset::from_repetitions(reps).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.subjects().len(), 7);
}

#[test]
fn malformed_files_report_location() {
    let ds = Dataset::from_repetitions(vec![rep("r1", "s", 1), rep("r2", "s", 2)]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ds, dir.path()).unwrap();
    let manifest = dir.path().join("manifest.json");
    let csv_path = dir.path().join("reps/r1.csv");
    let text = std::fs::read_to_string(&csv_path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[3].split(',').map(String::from).collect();
    fields[1] = "2.0".into();
    lines[3] = fields.join(",");
    std::fs::write(&csv_path, lines.join("\n")).unwrap();
    match load_dataset(&manifest) {
        Err(Error::Validation { row, .. }) => assert_eq!(row, 2),
        other => panic!("{other:?}"),
    }
    std::fs::remove_file(&csv_path).unwrap();
    assert!(matches!(load_dataset(&manifest), Err(Error::Io { .. })));
    std::fs::write(&manifest, "{ not json").unwrap();
    assert!(matches!(load_dataset(&manifest), Err(Error::Parse { .. })));
}

#[test]
fn inertial_round_trip() {
    let manifest = DatasetManifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        exercise_id: "ex".into(),
        data_kind: DataKind::Inertial,
        sample_rate: 100.0,
        segments: vec![SegmentEntry {
            id: "a".into(),
            calibration_window: Some([0, 2]),
            reference: None,
        }],
        subjects: vec!["s".into()],
        repetitions: vec![],
    };
    let samples: Vec<ImuSample> = (0..5)
        .map(|i| ImuSample {
            gyro: [0.1 * i as f64, 0.0, -0.2],
            accel: [0.0, 0.0, 9.81],
            dt: 0.01,
        })
        .collect();
    let rec = InertialRecording {
        entry: RepetitionEntry {
            id: "r".into(),
            subject_id: "s".into(),
            label: Label::new(3).unwrap(),
            source: RepetitionSource::Real,
            file: "raw/r.csv".into(),
            rater_labels: vec![Label::new(3).unwrap(), Label::new(2).unwrap()],
            provenance: None,
        },
        segments: vec![samples],
    };
    let dir = tempfile::tempdir().unwrap();
    save_inertial(&manifest, std::slice::from_ref(&rec), dir.path()).unwrap();
    let (m, recs) = load_inertial(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.segments, manifest.segments);
    assert_eq!(recs, vec![rec]);
    assert!(load_dataset(&dir.path().join("manifest.json")).is_err());
}

#[test]
fn corpus_matches_requested_shape() {
    let spec = CorpusSpec::deep_squat();
    let model = spec.skeletal_model().unwrap();
    let rs = RuleSet::deep_squat();
    let reps = synthesize_corpus(&model, &rs, &spec, 20, 4).unwrap();
    assert_eq!(reps.len(), 20);
    let mut expected = [0; 3];
    for (subject, n) in spec
        .subjects
        .iter()
        .zip(super::synth::apportion_for_tests(20, &[1.0; 7]))
    {
        let weights = subject.class_weights.unwrap_or(spec.class_weights);
        for (c, k) in super::synth::apportion_for_tests(n, &weights)
            .into_iter()
            .enumerate()
        {
            expected[c] += k;
        }
    }
    assert_eq!(class_counts(reps.iter().map(|r| r.label)), expected);
    assert_eq!(reps[0].segment_ids().count(), model.segment_count());
    assert_eq!(reps, synthesize_corpus(&model, &rs, &spec, 20, 4).unwrap());
    assert_eq!(
        super::synth::apportion_for_tests(10, &[1.0, 1.0, 1.0]),
        vec![4, 3, 3]
    );
    assert_eq!(
        super::synth::apportion_for_tests(0, &[1.0, 2.0]),
        vec![0, 0]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn splits_never_leak(subjects in 2usize..5, a in 1usize..4, b in 1usize..4, c in 1usize..4, k in 2usize..4, seed in any::<u64>()) {
        let reps = grid(subjects, [a, b, c]);
        for plan in loso_split(&reps, seed).unwrap() {
            prop_assert!(audit_leakage(&plan, &reps, &[]).is_ok());
        }
        if k <= reps.len() {
            let plans = stratified_kfold(&reps, k, seed).unwrap();
            let total: usize = plans.iter().map(|p| p.test.len()).sum();
            prop_assert_eq!(total, reps.len());
            for plan in &plans {
                prop_assert!(audit_leakage(plan, &reps, &[]).is_ok());
            }
        }
    }

    #[test]
    fn oversampling_reaches_majority(counts in prop::array::uniform3(1usize..20), seed in any::<u64>()) {
        let labels: Vec<Label> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(Label::from_index(c), n))
            .collect();
        let idx = oversample_indices(&labels, seed).unwrap();
        let max = *counts.iter().max().unwrap();
        prop_assert_eq!(class_counts(idx.iter().map(|&i| labels[i])), [max; 3]);
    }
}
