use super::*;
use crate::rotation::{euler_to_quat, EulerAngles, OrientationTrajectory, Quaternion};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

fn hinge(id: &str, parent: &str, attach: Option<Vec3>, lo: f64, hi: f64) -> SegmentDef {
    SegmentDef {
        id: id.into(),
        parent: Some(parent.into()),
        length: 1.0,
        attach,
        direction: [0.0, 0.0, -1.0],
        dofs: vec![DofDef {
            name: "flex".into(),
            axis: [0.0, 1.0, 0.0],
            lo,
            hi,
        }],
    }
}

fn base() -> SegmentDef {
    SegmentDef {
        id: "base".into(),
        parent: None,
        length: 0.1,
        attach: None,
        direction: [0.0, 0.0, -1.0],
        dofs: vec![],
    }
}

fn planar_chain(links: usize) -> SkeletalModel {
    let mut segments = vec![base()];
    for i in 0..links {
        let (id, parent, attach) = if i == 0 {
            ("link0".to_string(), "base".to_string(), Some([0.0; 3]))
        } else {
            (format!("link{i}"), format!("link{}", i - 1), None)
        };
        segments.push(hinge(&id, &parent, attach, -3.0, 3.0));
    }
    SkeletalModel::from_file_data(ModelFile {
        schema_version: MODEL_SCHEMA_VERSION,
        name: "planar".into(),
        segments,
        landmarks: vec![],
        metrics: vec![],
        anchor: None,
    })
    .unwrap()
}

pub(crate) fn random_pose(model: &SkeletalModel, rng: &mut impl Rng) -> Pose {
    let joint_angles = model
        .limits()
        .into_iter()
        .map(|(lo, hi)| {
            // Stay a little inside the limits so the optimum is interior.
            let margin = 0.02 * (hi - lo);
            rng.random_range(lo + margin..hi - margin)
        })
        .collect();
    let root = euler_to_quat(EulerAngles::new(
        rng.random_range(-0.3..0.3),
        rng.random_range(-0.3..0.3),
        rng.random_range(-3.0..3.0),
    ))
    .unwrap();
    Pose {
        root_position: [0.0; 3],
        root_orientation: root,
        joint_angles,
    }
}

fn max_angle_error(a: &Pose, b: &Pose) -> f64 {
    a.joint_angles
        .iter()
        .zip(&b.joint_angles)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn bundled_models_have_expected_shape() {
    let full = SkeletalModel::full_body();
    assert_eq!(full.segment_count(), 15);
    assert_eq!(full.dof_count(), 30);
    let lower = SkeletalModel::lower_body();
    assert_eq!(lower.segment_count(), 9);
    assert_eq!(lower.segment_ids().next(), Some("pelvis"));
    for (lo, hi) in full.limits() {
        assert!(lo <= hi);
    }
}

#[test]
fn model_validation_rejects_bad_documents() {
    let mut file = SkeletalModel::lower_body().file().clone();
    file.segments[3].length = 0.0;
    assert!(matches!(
        SkeletalModel::from_file_data(file),
        Err(Error::Config(_))
    ));

    let mut file = SkeletalModel::lower_body().file().clone();
    file.segments[1].parent = Some("nowhere".into());
    assert!(SkeletalModel::from_file_data(file).is_err());

    let mut file = SkeletalModel::lower_body().file().clone();
    file.segments[4].dofs[0].lo = 1.0;
    file.segments[4].dofs[0].hi = 0.0;
    assert!(SkeletalModel::from_file_data(file).is_err());

    let mut file = SkeletalModel::lower_body().file().clone();
    file.schema_version = 99;
    assert!(SkeletalModel::from_file_data(file).is_err());

    let mut file = SkeletalModel::lower_body().file().clone();
    file.metrics.push(MetricDef::new(
        "bogus",
        MetricKind::RelativeHeight {
            landmark: "wing_tip".into(),
            reference: "toe_r".into(),
        },
    ));
    assert!(matches!(
        SkeletalModel::from_file_data(file),
        Err(Error::Config(_))
    ));
}

#[test]
fn model_file_round_trips_through_json() {
    let model = SkeletalModel::full_body();
    let text = serde_json::to_string(model.file()).unwrap();
    let again = SkeletalModel::from_json(&text).unwrap();
    assert_eq!(again.file(), model.file());
}

#[test]
fn neutral_pose_is_upright_stack() {
    let model = SkeletalModel::lower_body();
    let f = forward_kinematics(&model, &Pose::neutral(&model)).unwrap();
    for q in &f.orientations {
        assert_eq!(*q, Quaternion::IDENTITY);
    }
    let femur = model.segment_index("femur_r").unwrap();
    let tibia = model.segment_index("tibia_r").unwrap();
    assert_eq!(f.proximal[femur], [0.0, -0.09, -0.08]);
    assert!((f.distal[femur][2] - (-0.50)).abs() < 1e-12);
    assert_eq!(f.proximal[tibia], f.distal[femur]);
    let torso = model.segment_index("torso").unwrap();
    assert!((f.distal[torso][2] - 0.50).abs() < 1e-12);
}

#[test]
fn single_hinge_matches_planar_trigonometry() {
    let model = planar_chain(1);
    let mut pose = Pose::neutral(&model);
    let f = forward_kinematics(&model, &pose).unwrap();
    assert_eq!(f.distal[1], [0.0, 0.0, -1.0]);
    pose.joint_angles[0] = FRAC_PI_2;
    let f = forward_kinematics(&model, &pose).unwrap();
    let oracle = [-(FRAC_PI_2).sin(), 0.0, -(FRAC_PI_2).cos()];
    for k in 0..3 {
        assert!((f.distal[1][k] - oracle[k]).abs() < 1e-12);
    }
}

#[test]
fn two_link_arm_matches_closed_form() {
    let model = planar_chain(2);
    let mut pose = Pose::neutral(&model);
    pose.joint_angles = vec![FRAC_PI_4, FRAC_PI_4];
    let f = forward_kinematics(&model, &pose).unwrap();
    let (a1, a12) = (FRAC_PI_4, FRAC_PI_2);
    let x = -(a1.sin() + a12.sin());
    let z = -(a1.cos() + a12.cos());
    assert!((f.distal[2][0] - x).abs() < 1e-12);
    assert!(f.distal[2][1].abs() < 1e-12);
    assert!((f.distal[2][2] - z).abs() < 1e-12);
}

#[test]
fn fk_rejects_wrong_dimension() {
    let model = planar_chain(2);
    let mut pose = Pose::neutral(&model);
    pose.joint_angles.push(0.0);
    assert!(matches!(
        forward_kinematics(&model, &pose),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn fk_then_ik_recovers_random_poses() {
    let model = SkeletalModel::full_body();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..15 {
        let truth = random_pose(&model, &mut rng);
        let f = forward_kinematics(&model, &truth).unwrap();
        let sol = fit_pose(
            &model,
            &Targets::from_orientations(&f.orientations),
            &Pose::neutral(&model),
        )
        .unwrap();
        assert!(sol.residual <= 1e-6, "residual {}", sol.residual);
        assert!(max_angle_error(&sol.pose, &truth) <= 1e-3);
        assert!(sol.pose.within_limits(&model));
    }
}

#[test]
fn unreachable_target_clamps_at_limit() {
    let model = planar_chain(1);
    let targets = Targets::new(
        &model,
        [("link0", Quaternion::from_axis_angle([0.0, 1.0, 0.0], 3.1))],
    )
    .unwrap();
    let mut file = model.file().clone();
    file.segments[1].dofs[0].hi = 1.0;
    let limited = SkeletalModel::from_file_data(file).unwrap();
    let sol = fit_pose(&limited, &targets, &Pose::neutral(&limited)).unwrap();
    assert_eq!(sol.pose.joint_angles[0], 1.0);
    assert!(sol.residual > 0.0);
}

#[test]
fn warm_start_at_optimum_is_fixed_point() {
    let model = SkeletalModel::full_body();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let truth = random_pose(&model, &mut rng);
    let f = forward_kinematics(&model, &truth).unwrap();
    let sol = fit_pose(&model, &Targets::from_orientations(&f.orientations), &truth).unwrap();
    assert!(sol.iterations <= 2);
    assert!(max_angle_error(&sol.pose, &truth) < 1e-12);
}

#[test]
fn empty_targets_are_rejected() {
    let model = SkeletalModel::lower_body();
    let t = Targets::new(&model, []).unwrap();
    assert!(matches!(
        fit_pose(&model, &t, &Pose::neutral(&model)),
        Err(Error::InvalidArgument(_))
    ));
}

/// Smooth in-limits motion: a squat-like bend of hips, knees and ankles.
fn smooth_motion(model: &SkeletalModel, frames: usize) -> Vec<Pose> {
    let hip = model.dof_index("femur_r", "hip_flexion").unwrap();
    let knee = model.dof_index("tibia_r", "knee_flexion").unwrap();
    let ankle = model.dof_index("foot_r", "ankle_plantarflexion").unwrap();
    let lumbar = model.dof_index("torso", "lumbar_flexion").unwrap();
    (0..frames)
        .map(|i| {
            let s = (std::f64::consts::PI * i as f64 / (frames - 1) as f64)
                .sin()
                .powi(2);
            let mut p = Pose::neutral(model);
            p.joint_angles[hip] = 1.2 * s;
            p.joint_angles[knee] = 1.6 * s + 0.01;
            p.joint_angles[ankle] = -0.4 * s;
            p.joint_angles[lumbar] = 0.5 * s;
            p.root_orientation = Quaternion::from_axis_angle([0.0, 1.0, 0.0], -0.2 * s);
            p
        })
        .collect()
}

#[test]
fn run_ik_tracks_smooth_motion() {
    let model = SkeletalModel::lower_body();
    let truth = smooth_motion(&model, 40);
    let trajs = export_consistent_orientations(&model, &truth, 50.0).unwrap();
    let track = run_ik(&model, &trajs).unwrap();
    assert_eq!(track.poses.len(), 40);
    assert!(track.max_residual() <= 1e-6);
    for (p, t) in track.poses.iter().zip(&truth) {
        assert!(max_angle_error(p, t) <= 1e-3);
    }
}

#[test]
fn run_ik_constant_targets_give_constant_poses() {
    let model = SkeletalModel::lower_body();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let truth = random_pose(&model, &mut rng);
    let trajs = export_consistent_orientations(&model, &vec![truth; 6], 50.0).unwrap();
    let track = run_ik(&model, &trajs).unwrap();
    for p in &track.poses[1..] {
        assert!(max_angle_error(p, &track.poses[0]) < 1e-9);
        for k in 0..3 {
            assert!((p.root_position[k] - track.poses[0].root_position[k]).abs() < 1e-9);
        }
    }
}

#[test]
fn run_ik_rejects_mismatched_lengths() {
    let model = SkeletalModel::lower_body();
    let a = OrientationTrajectory::new("pelvis", 50.0, vec![Quaternion::IDENTITY; 4]).unwrap();
    let b = OrientationTrajectory::new("torso", 50.0, vec![Quaternion::IDENTITY; 5]).unwrap();
    assert!(matches!(
        run_ik(&model, &[a, b]),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn run_ik_flags_limit_violations() {
    let model = SkeletalModel::lower_body();
    // Knee hyperextended by 0.5 rad in the middle frames.
    let knee = model.dof_index("tibia_r", "knee_flexion").unwrap();
    let mut poses = vec![Pose::neutral(&model); 8];
    for p in &mut poses[3..5] {
        p.joint_angles[knee] = -0.5;
    }
    let trajs: Vec<_> = model
        .segment_ids()
        .enumerate()
        .map(|(s, id)| {
            let samples = poses
                .iter()
                .map(|p| super::kinematics::orientations_only(&model, p)[s])
                .collect();
            OrientationTrajectory::new(id, 50.0, samples).unwrap()
        })
        .collect();
    let track = run_ik(&model, &trajs).unwrap();
    for p in &track.poses {
        assert!(p.within_limits(&model));
    }
    assert_eq!(track.flagged_frames(1e-4), vec![3, 4]);
}

#[test]
fn export_of_neutral_poses_is_identity() {
    let model = SkeletalModel::full_body();
    let trajs =
        export_consistent_orientations(&model, &vec![Pose::neutral(&model); 3], 60.0).unwrap();
    assert_eq!(trajs.len(), 15);
    for t in &trajs {
        assert!(t.samples().iter().all(|&q| q == Quaternion::IDENTITY));
    }
}

#[test]
fn export_after_ik_is_stable_under_reprojection() {
    let model = SkeletalModel::lower_body();
    let truth = smooth_motion(&model, 20);
    let first = export_consistent_orientations(&model, &truth, 50.0).unwrap();
    let track = run_ik(&model, &first).unwrap();
    let second = export_consistent_orientations(&model, &track.poses, 50.0).unwrap();
    let third =
        export_consistent_orientations(&model, &run_ik(&model, &second).unwrap().poses, 50.0)
            .unwrap();
    for ((a, b), c) in first.iter().zip(&second).zip(&third) {
        for ((qa, qb), qc) in a.samples().iter().zip(b.samples()).zip(c.samples()) {
            assert!(qa.angle_to(*qb) <= 1e-3);
            assert!(qb.angle_to(*qc) <= 1e-6);
        }
    }
}

#[test]
fn neutral_metrics() {
    let model = SkeletalModel::full_body();
    let m = extract_metrics(&model, &[Pose::neutral(&model)], model.metrics()).unwrap();
    let agg = |id: &str| m.aggregate(id).unwrap().max;
    assert!((agg("femur_elevation_r") + FRAC_PI_2).abs() < 1e-12);
    assert_eq!(agg("heel_height_r"), 0.0);
    assert_eq!(agg("pelvis_lateral"), 0.0);
    assert_eq!(agg("torso_inclination"), 0.0);
}

#[test]
fn horizontal_thigh_has_zero_elevation() {
    let model = SkeletalModel::full_body();
    let mut pose = Pose::neutral(&model);
    pose.joint_angles[model.dof_index("femur_r", "hip_flexion").unwrap()] = FRAC_PI_2;
    let m = extract_metrics(&model, &[pose], model.metrics()).unwrap();
    assert!(m.aggregate("femur_elevation_r").unwrap().max.abs() < 1e-9);
}

#[test]
fn pelvis_shift_shows_as_lateral_displacement() {
    let model = SkeletalModel::lower_body();
    let neutral = Pose::neutral(&model);
    let mut shifted = neutral.clone();
    shifted.root_position = [0.0, 0.05, 0.0];
    let poses = [neutral.clone(), shifted, neutral];
    let m = extract_metrics(&model, &poses, model.metrics()).unwrap();
    let lateral = m.aggregate("pelvis_lateral").unwrap();
    assert!((lateral.max - 0.05).abs() < 1e-9);
    assert!(lateral.min <= lateral.mean && lateral.mean <= lateral.max);
}

#[test]
fn unknown_metric_reference_is_config_error() {
    let model = SkeletalModel::lower_body();
    let bogus = [MetricDef::new(
        "x",
        MetricKind::SegmentElevation {
            segment: "humerus_r".into(),
        },
    )];
    assert!(matches!(
        extract_metrics(&model, &[Pose::neutral(&model)], &bogus),
        Err(Error::Config(_))
    ));
}

#[test]
fn run_ik_is_deterministic() {
    let model = SkeletalModel::lower_body();
    let trajs = export_consistent_orientations(&model, &smooth_motion(&model, 12), 50.0).unwrap();
    assert_eq!(
        run_ik(&model, &trajs).unwrap(),
        run_ik(&model, &trajs).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adversarial_targets_never_violate_limits(seed in any::<u64>()) {
        let model = SkeletalModel::lower_body();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let targets: Vec<(String, Quaternion)> = model
            .segment_ids()
            .map(|id| {
                let e = EulerAngles::new(
                    rng.random_range(-3.1..3.1),
                    rng.random_range(-1.5..1.5),
                    rng.random_range(-3.1..3.1),
                );
                (id.to_string(), euler_to_quat(e).unwrap())
            })
            .collect();
        let t = Targets::new(&model, targets.iter().map(|(id, q)| (id.as_str(), *q))).unwrap();
        let sol = fit_pose(&model, &t, &Pose::neutral(&model)).unwrap();
        prop_assert!(sol.pose.within_limits(&model));
    }

    #[test]
    fn metric_aggregates_are_ordered(seed in any::<u64>()) {
        let model = SkeletalModel::full_body();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poses: Vec<_> = (0..5).map(|_| random_pose(&model, &mut rng)).collect();
        let m = extract_metrics(&model, &poses, model.metrics()).unwrap();
        for a in m.aggregates.values() {
            prop_assert!(a.min <= a.mean && a.mean <= a.max);
        }
    }
}
