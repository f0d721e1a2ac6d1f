//! Orientation-tracking inverse kinematics.
//!
//! Minimizes the sum of squared geodesic angles between model segment
//! orientations and target orientations by damped Gauss-Newton steps on one
//! joint DoF at a time, clamping every DoF to its limits. Rotating DoF `k` of a
//! joint by `d` left-multiplies every world orientation in the joint's subtree
//! by a rotation of `d` about the DoF's world axis `u`, so the exact partial
//! derivative of the objective is `2 * sum(u . log(W_s * T_s^-1))` and each
//! affected segment contributes 2 to the Gauss-Newton curvature.

use super::kinematics::{axis_rotation, fk_unchecked, orient_segment, orientations_only, Pose};
use super::SkeletalModel;
use crate::rotation::{
    cross3, dot3, scale3, sub3, wrap_angle, OrientationTrajectory, Quaternion, Vec3,
};
use crate::{Error, Result};

/// Objective improvement per sweep below which the solver stops (rad^2).
pub const CONVERGENCE_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;
/// Added to the Gauss-Newton curvature of each coordinate step.
const DAMPING: f64 = 1e-3;
const MAX_HALVINGS: usize = 8;

/// Target orientations for a subset of segments, indexed by model order.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    per_segment: Vec<Option<Quaternion>>,
}

impl Targets {
    pub fn new<'a>(
        model: &SkeletalModel,
        targets: impl IntoIterator<Item = (&'a str, Quaternion)>,
    ) -> Result<Self> {
        let mut per_segment = vec![None; model.segment_count()];
        for (id, q) in targets {
            per_segment[model.segment_index(id)?] = Some(q.check_unit()?);
        }
        Ok(Targets { per_segment })
    }

    /// Targets for every segment, taken from a forward-kinematics result.
    pub fn from_orientations(orientations: &[Quaternion]) -> Self {
        Targets {
            per_segment: orientations.iter().map(|&q| Some(q)).collect(),
        }
    }

    pub fn get(&self, segment: usize) -> Option<Quaternion> {
        self.per_segment.get(segment).copied().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.per_segment.iter().all(Option::is_none)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IkSolution {
    pub pose: Pose,
    /// Sum of squared orientation errors over targeted segments, rad^2.
    pub residual: f64,
    pub iterations: usize,
}

fn residual_of(targets: &Targets, orientations: &[Quaternion], segments: &[usize]) -> f64 {
    segments
        .iter()
        .filter_map(|&s| targets.get(s).map(|t| orientations[s].angle_to(t).powi(2)))
        .sum()
}

pub fn fit_pose(model: &SkeletalModel, targets: &Targets, warm_start: &Pose) -> Result<IkSolution> {
    warm_start.check(model)?;
    if targets.per_segment.len() != model.segment_count() || targets.is_empty() {
        return Err(Error::InvalidArgument(
            "inverse kinematics needs at least one target orientation".into(),
        ));
    }
    let limits = model.limits();
    let mut pose = warm_start.clone();
    for (a, &(lo, hi)) in pose.joint_angles.iter_mut().zip(&limits) {
        *a = a.clamp(lo, hi);
    }
    if let Some(t) = targets.get(0) {
        pose.root_orientation = t.canonical();
    }

    let all: Vec<usize> = (0..model.segment_count()).collect();
    let targeted_in_subtree: Vec<usize> = all
        .iter()
        .map(|&s| {
            model
                .segment(s)
                .subtree
                .iter()
                .filter(|&&t| targets.get(t).is_some())
                .count()
        })
        .collect();

    let mut orient = orientations_only(model, &pose);
    let mut objective = residual_of(targets, &orient, &all);
    let (seeded, seeded_orient) = analytic_seed(model, targets, &pose, &limits);
    let seeded_objective = residual_of(targets, &seeded_orient, &all);
    if seeded_objective < objective {
        pose = seeded;
        orient = seeded_orient;
        objective = seeded_objective;
    }
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for seg in 1..model.segment_count() {
            let count = targeted_in_subtree[seg];
            let segment = model.segment(seg);
            if count == 0 || segment.def.dofs.is_empty() {
                continue;
            }
            let parent = segment.parent.expect("non-root segment");
            for k in 0..segment.def.dofs.len() {
                let idx = segment.dof_start + k;
                let mut prefix = orient[parent];
                for (j, dof) in segment.def.dofs[..k].iter().enumerate() {
                    prefix =
                        prefix * axis_rotation(dof.axis, pose.joint_angles[segment.dof_start + j]);
                }
                let axis = prefix.rotate(segment.def.dofs[k].axis);
                let grad: f64 = segment
                    .subtree
                    .iter()
                    .filter_map(|&t| {
                        targets.get(t).map(|target| {
                            dot3(axis, (orient[t] * target.conjugate()).rotation_vector())
                        })
                    })
                    .sum();
                let full_step = -grad / (count as f64 + DAMPING);
                if full_step.abs() < 1e-15 {
                    continue;
                }
                let (lo, hi) = limits[idx];
                let old_angle = pose.joint_angles[idx];
                let old_cost = residual_of(targets, &orient, &segment.subtree);
                let mut step = full_step;
                let mut accepted = false;
                for _ in 0..MAX_HALVINGS {
                    let candidate = (old_angle + step).clamp(lo, hi);
                    if candidate == old_angle {
                        break;
                    }
                    pose.joint_angles[idx] = candidate;
                    for &t in &segment.subtree {
                        orient_segment(model, &pose, t, &mut orient);
                    }
                    if residual_of(targets, &orient, &segment.subtree) <= old_cost {
                        accepted = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    pose.joint_angles[idx] = old_angle;
                    for &t in &segment.subtree {
                        orient_segment(model, &pose, t, &mut orient);
                    }
                }
            }
        }
        let next = residual_of(targets, &orient, &all);
        let improvement = objective - next;
        objective = next;
        if improvement < CONVERGENCE_TOLERANCE {
            break;
        }
    }
    Ok(IkSolution {
        pose,
        residual: objective,
        iterations,
    })
}

/// Per-joint initial guess: each targeted segment's DoFs are set from the
/// relative rotation between its parent (as seeded so far) and its own target,
/// decomposed about the DoF axes and clamped. Joints with non-orthogonal axes
/// or no target keep their current angles.
fn analytic_seed(
    model: &SkeletalModel,
    targets: &Targets,
    start: &Pose,
    limits: &[(f64, f64)],
) -> (Pose, Vec<Quaternion>) {
    let mut pose = start.clone();
    let mut orient = vec![Quaternion::IDENTITY; model.segment_count()];
    for seg in 0..model.segment_count() {
        let segment = model.segment(seg);
        if let (Some(parent), Some(target)) = (segment.parent, targets.get(seg)) {
            let relative = orient[parent].conjugate() * target;
            let axes: Vec<Vec3> = segment.def.dofs.iter().map(|d| d.axis).collect();
            if let Some(angles) = decompose_about_axes(&axes, relative) {
                for (k, a) in angles.into_iter().enumerate() {
                    let idx = segment.dof_start + k;
                    let (lo, hi) = limits[idx];
                    pose.joint_angles[idx] = a.clamp(lo, hi);
                }
            }
        }
        orient_segment(model, &pose, seg, &mut orient);
    }
    (pose, orient)
}

/// Angles `t` with `R(a1, t1) * R(a2, t2) * R(a3, t3) = rotation` for mutually
/// orthogonal unit axes. With fewer than three axes the missing ones are
/// completed to an orthonormal frame and their angles dropped.
fn decompose_about_axes(axes: &[Vec3], rotation: Quaternion) -> Option<Vec<f64>> {
    const ORTHO: f64 = 1e-9;
    match axes {
        [] => Some(Vec::new()),
        [a] => {
            let q = rotation.canonical();
            let twist = 2.0 * dot3([q.x, q.y, q.z], *a).atan2(q.w);
            Some(vec![wrap_angle(twist)])
        }
        [a1, a2] => {
            if dot3(*a1, *a2).abs() > ORTHO {
                return None;
            }
            let full = decompose_about_axes(&[*a1, *a2, cross3(*a1, *a2)], rotation)?;
            Some(full[..2].to_vec())
        }
        [a1, a2, a3] => {
            if dot3(*a1, *a2).abs() > ORTHO
                || dot3(*a1, *a3).abs() > ORTHO
                || dot3(*a2, *a3).abs() > ORTHO
            {
                return None;
            }
            // In the basis (a1, a2, +-a3) the sequence is an intrinsic X-Y-Z one.
            let handed = dot3(cross3(*a1, *a2), *a3).signum();
            let basis = [*a1, *a2, scale3(*a3, handed)];
            let m = rotation.to_matrix();
            let r = |i: usize, j: usize| -> f64 {
                let mut acc = 0.0;
                for p in 0..3 {
                    for q in 0..3 {
                        acc += basis[i][p] * m[p][q] * basis[j][q];
                    }
                }
                acc
            };
            let t2 = r(0, 2).clamp(-1.0, 1.0).asin();
            let t1 = (-r(1, 2)).atan2(r(2, 2));
            let t3 = (-r(0, 1)).atan2(r(0, 0));
            Some(vec![t1, t2, handed * t3])
        }
        _ => None,
    }
}

/// Poses and fit residuals for every frame of a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct IkTrack {
    pub poses: Vec<Pose>,
    pub residuals: Vec<f64>,
    pub sample_rate: f64,
}

impl IkTrack {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean_residual(&self) -> f64 {
        self.residuals.iter().sum::<f64>() / self.residuals.len().max(1) as f64
    }

    /// Frames whose residual exceeds `threshold` (typically limit violations).
    pub fn flagged_frames(&self, threshold: f64) -> Vec<usize> {
        self.residuals
            .iter()
            .enumerate()
            .filter(|(_, &r)| r > threshold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Solves every frame, warm-starting from the previous solution (frame 0
/// from the neutral pose). If the model declares an anchor landmark, the root
/// position is placed so the anchor stays where it was in frame 0.
pub fn run_ik(model: &SkeletalModel, trajs: &[OrientationTrajectory]) -> Result<IkTrack> {
    let Some(first) = trajs.first() else {
        return Err(Error::InvalidArgument(
            "no trajectories given to inverse kinematics".into(),
        ));
    };
    let len = first.len();
    let rate = first.sample_rate();
    let mut slots = Vec::with_capacity(trajs.len());
    for t in trajs {
        if t.len() != len || t.sample_rate() != rate {
            return Err(Error::InvalidArgument(format!(
                "trajectory {} has {} samples at {} Hz, expected {len} at {rate} Hz",
                t.segment_id(),
                t.len(),
                t.sample_rate()
            )));
        }
        slots.push(model.segment_index(t.segment_id())?);
    }

    let mut poses = Vec::with_capacity(len);
    let mut residuals = Vec::with_capacity(len);
    let mut warm = Pose::neutral(model);
    for frame in 0..len {
        let mut per_segment = vec![None; model.segment_count()];
        for (t, &s) in trajs.iter().zip(&slots) {
            per_segment[s] = Some(t.samples()[frame]);
        }
        let sol = fit_pose(model, &Targets { per_segment }, &warm)?;
        warm = sol.pose.clone();
        poses.push(sol.pose);
        residuals.push(sol.residual);
    }

    anchor_root_positions(model, &mut poses)?;
    Ok(IkTrack {
        poses,
        residuals,
        sample_rate: rate,
    })
}

/// Sets root positions so the model's anchor landmark stays at its frame-0
/// location (with the frame-0 root at the origin). No-op for models without
/// an anchor.
pub fn anchor_root_positions(model: &SkeletalModel, poses: &mut [Pose]) -> Result<()> {
    let Some(anchor) = model.anchor() else {
        return Ok(());
    };
    let mut reference = None;
    for pose in poses {
        pose.check(model)?;
        pose.root_position = [0.0; 3];
        let at = fk_unchecked(model, pose).landmark(model, anchor);
        let r = *reference.get_or_insert(at);
        pose.root_position = sub3(r, at);
    }
    Ok(())
}

/// Forward-kinematics orientation trajectories of every segment, in model order.
pub fn export_consistent_orientations(
    model: &SkeletalModel,
    poses: &[Pose],
    sample_rate: f64,
) -> Result<Vec<OrientationTrajectory>> {
    let mut per_segment: Vec<Vec<Quaternion>> =
        vec![Vec::with_capacity(poses.len()); model.segment_count()];
    for pose in poses {
        pose.check(model)?;
        for (s, q) in orientations_only(model, pose).into_iter().enumerate() {
            let q = q.try_normalized()?;
            let q = match per_segment[s].last() {
                Some(&prev) => q.aligned_with(prev),
                None => q.canonical(),
            };
            per_segment[s].push(q);
        }
    }
    per_segment
        .into_iter()
        .enumerate()
        .map(|(s, samples)| {
            OrientationTrajectory::new(model.segment_def(s).id.clone(), sample_rate, samples)
        })
        .collect()
}
