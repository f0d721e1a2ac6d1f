//! Browser bindings for three interactive views: augmenting the Euler curves
//! of a segment, SLERP-resampling between two orientations, and a forward
//! kinematics stick figure of the lower-body model.
//!
//! Every export returns a flat `Float64Array`; layouts are documented per
//! function. The `*_values` functions hold the logic and run natively too.

use std::f64::consts::PI;

use kinaug_core::augmentation::{augment_trajectory, euler_track, SegmentParams};
use kinaug_core::rotation::{
    euler_to_quat, resample_trajectory, EulerAngles, OrientationTrajectory, Quaternion,
};
use kinaug_core::skeleton::{forward_kinematics, Pose, SkeletalModel};
use wasm_bindgen::prelude::*;

const DEMO_RATE: f64 = 60.0;

/// One squat-like repetition of a shank: flexion out and back with a little
/// sway on the other axes.
pub fn demo_trajectory(frames: usize) -> kinaug_core::Result<OrientationTrajectory> {
    let samples = (0..frames)
        .map(|i| {
            let phase = i as f64 / (frames.max(2) - 1) as f64;
            let bump = (PI * phase).sin();
            euler_to_quat(EulerAngles::new(
                0.08 * (2.0 * PI * phase).sin(),
                0.1 + 0.7 * bump * bump,
                0.05 * bump,
            ))
        })
        .collect::<kinaug_core::Result<Vec<Quaternion>>>()?;
    OrientationTrajectory::new("tibia_r", DEMO_RATE, samples)
}

/// Source and augmented Euler curves: `[roll, pitch, yaw]` of the source
/// followed by the same for the augmented track, each `frames` long.
pub fn augment_values(
    beta: [f64; 3],
    delta: [f64; 3],
    frames: usize,
) -> kinaug_core::Result<Vec<f64>> {
    let source = demo_trajectory(frames)?;
    let (track, _) = euler_track(&source)?;
    let aug = augment_trajectory(&source, &SegmentParams { beta, delta })?;
    let mut out = Vec::with_capacity(6 * frames);
    for t in [&track, &aug.euler] {
        for axis in 0..3 {
            out.extend(t.iter().map(|e| e.to_array()[axis]));
        }
    }
    Ok(out)
}

/// `n` rows of `w, x, y, z, angle from start`.
pub fn slerp_values(start: [f64; 3], end: [f64; 3], n: usize) -> kinaug_core::Result<Vec<f64>> {
    let q0 = euler_to_quat(EulerAngles::from_array(start))?;
    let q1 = euler_to_quat(EulerAngles::from_array(end))?;
    let path = resample_trajectory(&OrientationTrajectory::new("demo", 1.0, vec![q0, q1])?, n)?;
    Ok(path
        .samples()
        .iter()
        .flat_map(|q| {
            let [w, x, y, z] = q.to_array();
            [w, x, y, z, q0.angle_to(*q)]
        })
        .collect())
}

/// Both legs share `hip_flexion`, `knee_flexion` and `ankle_plantarflexion`;
/// the torso takes `lumbar_flexion`. Returns one row of
/// `proximal xyz, distal xyz` per segment.
pub fn stick_values(hip: f64, knee: f64, ankle: f64, lumbar: f64) -> kinaug_core::Result<Vec<f64>> {
    let model = SkeletalModel::lower_body();
    let mut pose = Pose::neutral(&model);
    let mut set = |seg: &str, dof: &str, v: f64| -> kinaug_core::Result<()> {
        let i = model.dof_index(seg, dof)?;
        let (lo, hi) = model.limits()[i];
        pose.joint_angles[i] = v.clamp(lo, hi);
        Ok(())
    };
    for side in ["r", "l"] {
        set(&format!("femur_{side}"), "hip_flexion", hip)?;
        set(&format!("tibia_{side}"), "knee_flexion", knee)?;
        set(&format!("foot_{side}"), "ankle_plantarflexion", ankle)?;
    }
    set("torso", "lumbar_flexion", lumbar)?;
    let frames = forward_kinematics(&model, &pose)?;
    Ok(frames
        .proximal
        .iter()
        .zip(&frames.distal)
        .flat_map(|(p, d)| [p[0], p[1], p[2], d[0], d[1], d[2]])
        .collect())
}

fn js(e: kinaug_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn triple(v: &[f64], name: &str) -> Result<[f64; 3], JsError> {
    v.try_into()
        .map_err(|_| JsError::new(&format!("{name} needs 3 values, got {}", v.len())))
}

#[wasm_bindgen]
pub fn augment_curves(beta: &[f64], delta: &[f64], frames: usize) -> Result<Vec<f64>, JsError> {
    augment_values(triple(beta, "beta")?, triple(delta, "delta")?, frames).map_err(js)
}

#[wasm_bindgen]
pub fn slerp_path(start: &[f64], end: &[f64], n: usize) -> Result<Vec<f64>, JsError> {
    slerp_values(triple(start, "start")?, triple(end, "end")?, n).map_err(js)
}

#[wasm_bindgen]
pub fn stick_figure(hip: f64, knee: f64, ankle: f64, lumbar: f64) -> Result<Vec<f64>, JsError> {
    stick_values(hip, knee, ankle, lumbar).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn augmented_curves_start_at_beta_and_span_delta() {
        let beta = [0.1, 0.4, -0.2];
        let delta = [0.3, 1.0, 0.2];
        let v = augment_values(beta, delta, 50).unwrap();
        assert_eq!(v.len(), 300);
        for axis in 0..3 {
            let curve = &v[150 + 50 * axis..150 + 50 * (axis + 1)];
            assert!((curve[0] - beta[axis]).abs() < 1e-9);
            let span = curve.iter().cloned().fold(f64::MIN, f64::max)
                - curve.iter().cloned().fold(f64::MAX, f64::min);
            assert!((span - delta[axis]).abs() < 1e-9, "axis {axis}: {span}");
        }
    }

    #[test]
    fn slerp_angle_grows_linearly() {
        let v = slerp_values([0.0, 0.0, 0.0], [0.0, 0.0, 1.2], 7).unwrap();
        for (i, row) in v.chunks(5).enumerate() {
            assert!((row[4] - 0.2 * i as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn stick_figure_bends_with_the_knee() {
        let straight = stick_values(0.0, 0.0, 0.0, 0.0).unwrap();
        let bent = stick_values(0.0, 1.2, 0.0, 0.0).unwrap();
        assert_eq!(
            straight.len(),
            6 * SkeletalModel::lower_body().segment_count()
        );
        assert_ne!(straight, bent);
        assert!(stick_values(0.0, 0.0, 0.0, 0.0)
            .unwrap()
            .iter()
            .all(|x| x.is_finite()));
    }
}
