//! Kinematic metrics over pose sequences.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::kinematics::{fk_unchecked, Pose, SegmentFrames};
use super::{LandmarkRef, SkeletalModel};
use crate::rotation::{dot3, norm3, scale3, sub3, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    /// Angle of the segment's proximal-to-distal axis above the horizontal
    /// plane, in `[-pi/2, pi/2]`.
    SegmentElevation { segment: String },
    /// Tilt of the segment's long axis away from vertical, in `[0, pi/2]`.
    SegmentInclination { segment: String },
    /// Angle between the long axes of two segments treated as lines, in `[0, pi/2]`.
    SegmentAngle { a: String, b: String },
    /// Value of one joint DoF.
    JointAngle { segment: String, dof: String },
    /// Height of `landmark` above `reference`.
    RelativeHeight { landmark: String, reference: String },
    /// Distance between two landmarks projected onto the horizontal plane.
    HorizontalDistance { a: String, b: String },
    /// Signed lateral (y) displacement of a landmark from its first-frame position.
    LateralDisplacement { landmark: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDef {
    pub id: String,
    #[serde(flatten)]
    pub kind: MetricKind,
}

impl MetricDef {
    pub fn new(id: impl Into<String>, kind: MetricKind) -> Self {
        MetricDef {
            id: id.into(),
            kind,
        }
    }

    pub(crate) fn validate(&self, model: &SkeletalModel) -> Result<()> {
        self.compile(model).map(|_| ())
    }

    fn compile(&self, model: &SkeletalModel) -> Result<Compiled> {
        let wrap = |e: Error| Error::Config(format!("metric {}: {e}", self.id));
        let seg = |s: &str| model.segment_index(s).map_err(wrap);
        let lm = |l: &str| model.resolve_landmark(l).map_err(wrap);
        Ok(match &self.kind {
            MetricKind::SegmentElevation { segment } => Compiled::Elevation(seg(segment)?),
            MetricKind::SegmentInclination { segment } => Compiled::Inclination(seg(segment)?),
            MetricKind::SegmentAngle { a, b } => Compiled::Between(seg(a)?, seg(b)?),
            MetricKind::JointAngle { segment, dof } => {
                Compiled::Joint(model.dof_index(segment, dof).map_err(wrap)?)
            }
            MetricKind::RelativeHeight {
                landmark,
                reference,
            } => Compiled::Height(lm(landmark)?, lm(reference)?),
            MetricKind::HorizontalDistance { a, b } => Compiled::Horizontal(lm(a)?, lm(b)?),
            MetricKind::LateralDisplacement { landmark } => Compiled::Lateral(lm(landmark)?),
        })
    }
}

enum Compiled {
    Elevation(usize),
    Inclination(usize),
    Between(usize, usize),
    Joint(usize),
    Height(LandmarkRef, LandmarkRef),
    Horizontal(LandmarkRef, LandmarkRef),
    Lateral(LandmarkRef),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        // Summation rounding can push the mean a hair outside [min, max].
        Aggregate {
            min,
            max,
            mean: mean.clamp(min, max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KinematicMetrics {
    pub frames: BTreeMap<String, Vec<f64>>,
    pub aggregates: BTreeMap<String, Aggregate>,
}

impl KinematicMetrics {
    /// Builds metrics from per-frame values, computing the aggregates.
    pub fn from_frames(frames: BTreeMap<String, Vec<f64>>) -> Self {
        let aggregates = frames
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| (k.clone(), Aggregate::of(v)))
            .collect();
        KinematicMetrics { frames, aggregates }
    }

    pub fn aggregate(&self, metric: &str) -> Option<&Aggregate> {
        self.aggregates.get(metric)
    }
}

fn long_axis(model: &SkeletalModel, frames: &SegmentFrames, s: usize) -> Vec3 {
    let d = sub3(frames.distal[s], frames.proximal[s]);
    scale3(d, 1.0 / model.segment_def(s).length)
}

pub fn extract_metrics(
    model: &SkeletalModel,
    poses: &[Pose],
    catalogue: &[MetricDef],
) -> Result<KinematicMetrics> {
    if poses.is_empty() {
        return Err(Error::InvalidArgument(
            "no poses to extract metrics from".into(),
        ));
    }
    let compiled: Vec<_> = catalogue
        .iter()
        .map(|m| m.compile(model))
        .collect::<Result<_>>()?;
    for p in poses {
        p.check(model)?;
    }
    let all_frames: Vec<SegmentFrames> = poses.iter().map(|p| fk_unchecked(model, p)).collect();

    let mut frames = BTreeMap::new();
    for (def, c) in catalogue.iter().zip(&compiled) {
        let values: Vec<f64> = all_frames
            .iter()
            .zip(poses)
            .map(|(f, pose)| match *c {
                Compiled::Elevation(s) => long_axis(model, f, s)[2].clamp(-1.0, 1.0).asin(),
                Compiled::Inclination(s) => long_axis(model, f, s)[2].abs().min(1.0).acos(),
                Compiled::Between(a, b) => {
                    let (ua, ub) = (long_axis(model, f, a), long_axis(model, f, b));
                    (dot3(ua, ub).abs() / (norm3(ua) * norm3(ub)))
                        .min(1.0)
                        .acos()
                }
                Compiled::Joint(i) => pose.joint_angles[i],
                Compiled::Height(a, b) => f.landmark(model, a)[2] - f.landmark(model, b)[2],
                Compiled::Horizontal(a, b) => {
                    let d = sub3(f.landmark(model, a), f.landmark(model, b));
                    d[0].hypot(d[1])
                }
                Compiled::Lateral(l) => {
                    f.landmark(model, l)[1] - all_frames[0].landmark(model, l)[1]
                }
            })
            .collect();
        frames.insert(def.id.clone(), values);
    }
    Ok(KinematicMetrics::from_frames(frames))
}
