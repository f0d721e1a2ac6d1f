use serde::{Deserialize, Serialize};

use super::{LandmarkRef, SkeletalModel};
use crate::rotation::{add3, scale3, Quaternion, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub root_position: Vec3,
    pub root_orientation: Quaternion,
    /// Joint angles in model DoF order.
    pub joint_angles: Vec<f64>,
}

impl Pose {
    pub fn neutral(model: &SkeletalModel) -> Self {
        let joint_angles = model
            .limits()
            .into_iter()
            .map(|(lo, hi)| 0.0f64.clamp(lo, hi))
            .collect();
        Pose {
            root_position: [0.0; 3],
            root_orientation: Quaternion::IDENTITY,
            joint_angles,
        }
    }

    pub fn within_limits(&self, model: &SkeletalModel) -> bool {
        self.joint_angles.len() == model.dof_count()
            && self
                .joint_angles
                .iter()
                .zip(model.limits())
                .all(|(&a, (lo, hi))| a >= lo && a <= hi)
    }

    pub(crate) fn check(&self, model: &SkeletalModel) -> Result<()> {
        if self.joint_angles.len() != model.dof_count() {
            return Err(Error::InvalidArgument(format!(
                "pose has {} joint angles, model {} expects {}",
                self.joint_angles.len(),
                model.name(),
                model.dof_count()
            )));
        }
        self.root_orientation.check_unit()?;
        Ok(())
    }
}

/// World-frame orientation and end landmarks of every segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFrames {
    pub orientations: Vec<Quaternion>,
    pub proximal: Vec<Vec3>,
    pub distal: Vec<Vec3>,
}

impl SegmentFrames {
    pub(crate) fn landmark(&self, model: &SkeletalModel, lm: LandmarkRef) -> Vec3 {
        match lm {
            LandmarkRef::Proximal(s) => self.proximal[s],
            LandmarkRef::Distal(s) => self.distal[s],
            LandmarkRef::Point(s, i) => add3(
                self.proximal[s],
                self.orientations[s].rotate(model.landmark_local(i)),
            ),
        }
    }

    /// World position of `<segment>.proximal`, `<segment>.distal` or a named landmark.
    pub fn landmark_position(&self, model: &SkeletalModel, name: &str) -> Result<Vec3> {
        Ok(self.landmark(model, model.resolve_landmark(name)?))
    }
}

/// Rotation of a segment relative to its parent for the given joint angles.
pub(crate) fn joint_rotation(model: &SkeletalModel, segment: usize, angles: &[f64]) -> Quaternion {
    let s = model.segment(segment);
    let mut q = Quaternion::IDENTITY;
    for (k, dof) in s.def.dofs.iter().enumerate() {
        q = q * axis_rotation(dof.axis, angles[s.dof_start + k]);
    }
    q
}

/// Rotation about a unit axis; unlike `from_axis_angle` no sign canonicalization.
#[inline]
pub(crate) fn axis_rotation(axis: Vec3, angle: f64) -> Quaternion {
    let (s, c) = (0.5 * angle).sin_cos();
    Quaternion::new(c, s * axis[0], s * axis[1], s * axis[2])
}

/// Fills world orientations of `seg` from its parent's (already computed).
pub(crate) fn orient_segment(
    model: &SkeletalModel,
    pose: &Pose,
    seg: usize,
    orientations: &mut [Quaternion],
) {
    orientations[seg] = match model.segment(seg).parent {
        None => pose.root_orientation,
        Some(p) => orientations[p] * joint_rotation(model, seg, &pose.joint_angles),
    };
}

pub(crate) fn orientations_only(model: &SkeletalModel, pose: &Pose) -> Vec<Quaternion> {
    let mut o = vec![Quaternion::IDENTITY; model.segment_count()];
    for s in 0..model.segment_count() {
        orient_segment(model, pose, s, &mut o);
    }
    o
}

pub fn forward_kinematics(model: &SkeletalModel, pose: &Pose) -> Result<SegmentFrames> {
    pose.check(model)?;
    Ok(fk_unchecked(model, pose))
}

pub(crate) fn fk_unchecked(model: &SkeletalModel, pose: &Pose) -> SegmentFrames {
    let n = model.segment_count();
    let orientations = orientations_only(model, pose);
    let mut proximal = vec![[0.0; 3]; n];
    let mut distal = vec![[0.0; 3]; n];
    for s in 0..n {
        let seg = model.segment(s);
        proximal[s] = match seg.parent {
            None => pose.root_position,
            Some(p) => add3(proximal[p], orientations[p].rotate(seg.attach)),
        };
        distal[s] = add3(
            proximal[s],
            orientations[s].rotate(scale3(seg.def.direction, seg.def.length)),
        );
    }
    SegmentFrames {
        orientations,
        proximal,
        distal,
    }
}
