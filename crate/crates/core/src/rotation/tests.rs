use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

type Mat3 = [[f64; 3]; 3];

fn rx(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn ry(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rz(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn matmul(a: Mat3, b: Mat3) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

/// Rotation matrix via the sandwich product q v q* on the basis vectors.
fn sandwich_matrix(q: Quaternion) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for col in 0..3 {
        let mut e = [0.0; 3];
        e[col] = 1.0;
        let v = Quaternion::new(0.0, e[0], e[1], e[2]);
        let r = q * v * q.conjugate();
        m[0][col] = r.x;
        m[1][col] = r.y;
        m[2][col] = r.z;
    }
    m
}

/// Z-Y-X decomposition from a rotation matrix, independent of the quaternion path.
fn matrix_to_zyx(m: Mat3) -> (f64, f64, f64) {
    let pitch = (-m[2][0]).asin();
    let roll = m[2][1].atan2(m[2][2]);
    let yaw = m[1][0].atan2(m[0][0]);
    (roll, pitch, yaw)
}

fn max_abs_diff(a: Mat3, b: Mat3) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            d = d.max((a[i][j] - b[i][j]).abs());
        }
    }
    d
}

fn random_unit(rng: &mut impl Rng) -> Quaternion {
    loop {
        let q = Quaternion::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 0.1 && n < 1.0 {
            return q.try_normalized().unwrap();
        }
    }
}

fn assert_unit_canonical(q: Quaternion) {
    assert!((q.dot(q) - 1.0).abs() <= 1e-9, "norm {:?}", q);
    assert!(q.w >= 0.0, "non-canonical {:?}", q);
}

#[test]
fn identity_to_euler_is_zero() {
    let d = quat_to_euler(Quaternion::IDENTITY).unwrap();
    assert_eq!(d.angles, EulerAngles::new(0.0, 0.0, 0.0));
    assert!(!d.degenerate);
}

#[test]
fn quarter_turn_about_z_matches_matrix_oracle() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let q = Quaternion::new(h, 0.0, 0.0, h);
    let e = quat_to_euler(q).unwrap().angles;
    let (r, p, y) = matrix_to_zyx(sandwich_matrix(q));
    assert!((e.roll - r).abs() < 1e-12 && e.roll.abs() < 1e-12);
    assert!((e.pitch - p).abs() < 1e-12 && e.pitch.abs() < 1e-12);
    assert!((e.yaw - y).abs() < 1e-12 && (e.yaw - FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn euler_round_trip_on_random_quaternions() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tested = 0;
    while tested < 1000 {
        let q = random_unit(&mut rng);
        let d = quat_to_euler(q).unwrap();
        if d.angles.pitch.abs() >= FRAC_PI_2 - 0.1 {
            continue;
        }
        let back = euler_to_quat(d.angles).unwrap();
        assert!(back.angle_to(q) <= 1e-9, "{q:?} -> {back:?}");
        tested += 1;
    }
}

#[test]
fn zero_angles_give_identity() {
    assert_eq!(
        euler_to_quat(EulerAngles::default()).unwrap(),
        Quaternion::IDENTITY
    );
}

#[test]
fn half_turn_about_x() {
    let q = euler_to_quat(EulerAngles::new(PI, 0.0, 0.0)).unwrap();
    // axis-angle: (cos(pi/2), sin(pi/2) * x)
    assert!(q.w.abs() < 1e-15);
    assert!((q.x.abs() - 1.0).abs() < 1e-15);
    assert!(q.y.abs() < 1e-15 && q.z.abs() < 1e-15);
}

#[test]
fn euler_composition_matches_matrix_product() {
    let q = euler_to_quat(EulerAngles::new(0.1, 0.2, 0.3)).unwrap();
    let oracle = matmul(rz(0.3), matmul(ry(0.2), rx(0.1)));
    assert!(max_abs_diff(sandwich_matrix(q), oracle) < 1e-12);
    assert!(max_abs_diff(q.to_matrix(), oracle) < 1e-12);
}

#[test]
fn non_finite_and_non_unit_inputs_are_rejected() {
    assert!(matches!(
        euler_to_quat(EulerAngles::new(f64::NAN, 0.0, 0.0)),
        Err(Error::InvalidAngle(_))
    ));
    assert!(matches!(
        quat_to_euler(Quaternion::new(1.0, 0.1, 0.0, 0.0)),
        Err(Error::InvalidRotation(_))
    ));
    assert!(slerp(
        Quaternion::new(2.0, 0.0, 0.0, 0.0),
        Quaternion::IDENTITY,
        0.5
    )
    .is_err());
}

#[test]
fn gimbal_lock_folds_roll_into_yaw() {
    for &(roll, pitch, yaw) in &[
        (0.3, FRAC_PI_2, 0.5),
        (0.3, -FRAC_PI_2, 0.5),
        (-1.0, FRAC_PI_2, 2.0),
    ] {
        let q = euler_to_quat(EulerAngles::new(roll, pitch, yaw)).unwrap();
        let d = quat_to_euler(q).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.angles.roll, 0.0);
        // Same rotation despite the folded representation.
        let back = euler_to_quat(d.angles).unwrap();
        assert!(back.angle_to(q) < 1e-6, "{d:?}");
    }
}

#[test]
fn slerp_endpoints() {
    let q0 = euler_to_quat(EulerAngles::new(0.2, -0.4, 1.0)).unwrap();
    let q1 = euler_to_quat(EulerAngles::new(-1.0, 0.3, -2.5)).unwrap();
    assert_eq!(slerp(q0, q1, 0.0).unwrap(), q0);
    assert!(slerp(q0, q1, 1.0).unwrap().angle_to(q1) < 1e-15);
}

#[test]
fn slerp_half_of_quarter_turn() {
    let q1 = Quaternion::from_axis_angle([0.0, 0.0, 1.0], FRAC_PI_2);
    let m = slerp(Quaternion::IDENTITY, q1, 0.5).unwrap();
    let expected = Quaternion::new((PI / 8.0).cos(), 0.0, 0.0, (PI / 8.0).sin());
    assert!((m.w - expected.w).abs() < 1e-12 && (m.z - expected.z).abs() < 1e-12);
    assert!(m.x.abs() < 1e-15 && m.y.abs() < 1e-15);
}

#[test]
fn slerp_handles_opposite_hemisphere_and_tiny_angles() {
    let q0 = Quaternion::from_axis_angle([1.0, 0.0, 0.0], 0.4);
    let q1 = -Quaternion::from_axis_angle([1.0, 0.0, 0.0], 0.8);
    let m = slerp(q0, q1, 0.5).unwrap();
    assert!((m.angle_to(Quaternion::IDENTITY) - 0.6).abs() < 1e-12);

    let q2 = Quaternion::from_axis_angle([0.0, 1.0, 0.0], 1e-9);
    let m = slerp(Quaternion::IDENTITY, q2, 0.5).unwrap();
    assert_unit_canonical(m);
    assert!((m.angle_to(Quaternion::IDENTITY) - 5e-10).abs() < 1e-15);
}

#[test]
fn unwrap_leaves_smooth_tracks_alone() {
    let track: Vec<_> = [0.1, 0.2, 0.3]
        .iter()
        .map(|&a| EulerAngles::new(a, a, a))
        .collect();
    assert_eq!(unwrap_euler_track(&track), track);
}

#[test]
fn unwrap_crosses_pi() {
    let track = vec![
        EulerAngles::new(0.0, 0.0, 3.1),
        EulerAngles::new(0.0, 0.0, -3.1),
    ];
    let out = unwrap_euler_track(&track);
    assert_eq!(out[0], track[0]);
    assert!((out[1].yaw - (-3.1 + 2.0 * PI)).abs() < 1e-15);
    assert!((out[1].yaw - 3.1832).abs() < 1e-4);
}

#[test]
fn madgwick_static_level_is_fixed_point() {
    let s = ImuSample {
        gyro: [0.0; 3],
        accel: [0.0, 0.0, 9.81],
        dt: 0.37,
    };
    let step = madgwick_update(Quaternion::IDENTITY, &s, DEFAULT_MADGWICK_BETA).unwrap();
    assert_eq!(step.orientation, Quaternion::IDENTITY);
    assert!(!step.accel_skipped);
}

#[test]
fn madgwick_pure_gyro_integration() {
    // Closed form: constant rate w about z for time T is a rotation of w*T about z.
    let s = ImuSample {
        gyro: [0.0, 0.0, 1.0],
        accel: [0.0, 0.0, 9.81],
        dt: 0.01,
    };
    let mut q = Quaternion::IDENTITY;
    for _ in 0..100 {
        q = madgwick_update(q, &s, 0.0).unwrap().orientation;
    }
    let oracle = Quaternion::new(0.5f64.cos(), 0.0, 0.0, 0.5f64.sin());
    assert!(q.angle_to(oracle) < 1e-3);
}

#[test]
fn madgwick_zero_accel_skips_correction() {
    let s = ImuSample {
        gyro: [0.1, 0.0, 0.0],
        accel: [0.0; 3],
        dt: 0.01,
    };
    let step = madgwick_update(Quaternion::IDENTITY, &s, 0.5).unwrap();
    assert!(step.accel_skipped);
    let gyro_only = madgwick_update(Quaternion::IDENTITY, &s, 0.0).unwrap();
    assert_eq!(step.orientation, gyro_only.orientation);
}

#[test]
fn madgwick_converges_to_tilt() {
    let truth = euler_to_quat(EulerAngles::new(0.3, -0.2, 0.0)).unwrap();
    // Gravity reaction seen by the sensor: R^T * (0, 0, g).
    let m = sandwich_matrix(truth);
    let accel = [9.81 * m[2][0], 9.81 * m[2][1], 9.81 * m[2][2]];
    let s = ImuSample {
        gyro: [0.0; 3],
        accel,
        dt: 0.01,
    };
    let mut q = Quaternion::IDENTITY;
    for _ in 0..5000 {
        q = madgwick_update(q, &s, DEFAULT_MADGWICK_BETA)
            .unwrap()
            .orientation;
    }
    let e = quat_to_euler(q).unwrap().angles;
    assert!((e.roll - 0.3).abs() < 1e-3, "{e:?}");
    assert!((e.pitch + 0.2).abs() < 1e-3, "{e:?}");
}

#[test]
fn tilt_from_accel_predicts_measured_gravity() {
    let truth = euler_to_quat(EulerAngles::new(-0.5, 0.7, 0.0)).unwrap();
    let m = sandwich_matrix(truth);
    let q = tilt_from_accel([m[2][0], m[2][1], m[2][2]]);
    assert!(q.angle_to(truth) < 1e-12);
}

fn traj(samples: Vec<Quaternion>) -> OrientationTrajectory {
    OrientationTrajectory::new("seg", 100.0, samples).unwrap()
}

#[test]
fn resample_identity_length_is_noop() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = traj((0..256).map(|_| random_unit(&mut rng)).collect());
    assert_eq!(resample_trajectory(&t, 256).unwrap(), t);
}

#[test]
fn resample_two_samples_to_three() {
    let q1 = Quaternion::from_axis_angle([0.0, 0.0, 1.0], FRAC_PI_2);
    let t = traj(vec![Quaternion::IDENTITY, q1]);
    let r = resample_trajectory(&t, 3).unwrap();
    assert_eq!(r.len(), 3);
    let oracle = Quaternion::from_axis_angle([0.0, 0.0, 1.0], FRAC_PI_4);
    assert!(r.samples()[1].angle_to(oracle) < 1e-12);
}

#[test]
fn resample_rejects_short_targets() {
    let t = traj(vec![Quaternion::IDENTITY, Quaternion::IDENTITY]);
    assert!(matches!(
        resample_trajectory(&t, 1),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn trajectory_construction_aligns_hemispheres() {
    let a = Quaternion::from_axis_angle([1.0, 0.0, 0.0], 3.0);
    let b = Quaternion::from_axis_angle([1.0, 0.0, 0.0], -3.0);
    let t = traj(vec![a, b, a]);
    for w in t.samples().windows(2) {
        assert!(w[0].dot(w[1]) >= 0.0);
    }
    assert!(OrientationTrajectory::new("s", 100.0, vec![Quaternion::IDENTITY]).is_err());
    assert!(OrientationTrajectory::new(
        "s",
        100.0,
        vec![Quaternion::IDENTITY, Quaternion::new(0.0, 0.0, 0.0, 0.0)]
    )
    .is_err());
}

fn unit_quaternion() -> impl Strategy<Value = Quaternion> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("non-degenerate", |(w, x, y, z)| {
            (w * w + x * x + y * y + z * z) > 0.01
        })
        .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z).try_normalized().unwrap())
}

proptest! {
    #[test]
    fn producing_operations_return_unit_canonical(
        q0 in unit_quaternion(),
        q1 in unit_quaternion(),
        t in 0.0f64..=1.0,
        e in (-PI..PI, -1.5f64..1.5, -PI..PI),
    ) {
        assert_unit_canonical(slerp(q0, q1, t).unwrap());
        assert_unit_canonical(euler_to_quat(EulerAngles::new(e.0, e.1, e.2)).unwrap());
    }

    #[test]
    fn slerp_angle_is_linear_in_t(q0 in unit_quaternion(), q1 in unit_quaternion(), t in 0.0f64..=1.0) {
        let total = q0.angle_to(q1);
        let partial = slerp(q0, q1, t).unwrap().angle_to(q0);
        prop_assert!((partial - t * total).abs() <= 1e-9, "{partial} vs {}", t * total);
    }

    #[test]
    fn euler_round_trip_property(roll in -PI..PI, pitch in -1.47f64..1.47, yaw in -PI..PI) {
        let q = euler_to_quat(EulerAngles::new(roll, pitch, yaw)).unwrap();
        let e = quat_to_euler(q).unwrap().angles;
        prop_assert!((wrap_angle(e.roll - roll)).abs() <= 1e-9);
        prop_assert!((e.pitch - pitch).abs() <= 1e-9);
        prop_assert!((wrap_angle(e.yaw - yaw)).abs() <= 1e-9);
    }

    #[test]
    fn resample_preserves_endpoints(seed in any::<u64>(), len in 2usize..40, n in 2usize..300) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = traj((0..len).map(|_| random_unit(&mut rng)).collect());
        let r = resample_trajectory(&t, n).unwrap();
        prop_assert_eq!(r.len(), n);
        prop_assert_eq!(r.samples()[0], t.samples()[0]);
        // Downsampling non-smooth input may need one sign flip to keep
        // neighbors hemisphere-aligned; the components are still bit-equal.
        let last = r.samples()[n - 1];
        prop_assert!(last == t.samples()[len - 1] || last == -t.samples()[len - 1]);
    }

    #[test]
    fn resample_preserves_endpoints_of_smooth_tracks(len in 2usize..40, n in 2usize..300, rate in -3.0f64..3.0) {
        let samples = (0..len)
            .map(|i| Quaternion::from_axis_angle([0.3, -1.0, 0.5], rate * i as f64 / len as f64))
            .collect();
        let t = traj(samples);
        let r = resample_trajectory(&t, n).unwrap();
        prop_assert_eq!(r.samples()[0], t.samples()[0]);
        prop_assert_eq!(r.samples()[n - 1], t.samples()[len - 1]);
    }

    #[test]
    fn unwrap_then_rewrap_is_identity(raw in proptest::collection::vec((-PI..=PI, -1.5f64..1.5, -PI..=PI), 1..60)) {
        let track: Vec<_> = raw.iter().map(|&(r, p, y)| EulerAngles::new(r, p, y)).collect();
        let out = unwrap_euler_track(&track);
        prop_assert_eq!(out[0], track[0]);
        for (a, b) in out.iter().zip(&track) {
            prop_assert!((wrap_angle(a.roll) - b.roll).abs() <= 1e-12 || (wrap_angle(a.roll) - b.roll).abs() >= 2.0 * PI - 1e-12);
            prop_assert!((wrap_angle(a.pitch) - b.pitch).abs() <= 1e-12);
            prop_assert!((wrap_angle(a.yaw) - b.yaw).abs() <= 1e-12 || (wrap_angle(a.yaw) - b.yaw).abs() >= 2.0 * PI - 1e-12);
        }
        for w in out.windows(2) {
            prop_assert!((w[1].roll - w[0].roll).abs() <= PI + 1e-12);
            prop_assert!((w[1].yaw - w[0].yaw).abs() <= PI + 1e-12);
        }
    }
}
