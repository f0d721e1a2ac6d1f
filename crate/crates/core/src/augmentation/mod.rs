//! Class-conditional trajectory augmentation.
//!
//! Each segment trajectory is described by its first-frame Euler angles
//! (offset) and its per-axis Euler range. Offsets and ranges are modeled per
//! (exercise, class, segment) as independent Gaussians; new repetitions are
//! produced by rescaling a source trajectory's Euler excursion to a sampled
//! range around a sampled offset, projecting the result through inverse
//! kinematics, and keeping it only if the rule set grades it as the intended
//! class.

mod generate;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datasets::Repetition;
use crate::labeling::Label;
use crate::rotation::{
    euler_to_quat, quat_to_euler, unwrap_euler_track, EulerAngles, OrientationTrajectory, Vec3,
};
use crate::{Error, Result};

pub use generate::{
    candidate_seed, derive_seed, generate_candidate, generate_set, CandidateOutcome, ClassSummary,
    GenerationConfig, GenerationReport, PairReport, Provenance, Rejection, DEFAULT_MAX_ATTEMPTS,
};

pub const DISTRIBUTION_SCHEMA_VERSION: u32 = 1;

/// Axes whose observed Euler range is below this are treated as static.
pub const STATIC_RANGE_EPS: f64 = 1e-6;

/// Gaussian parameters of one segment's offset and range, per Euler axis
/// (roll, pitch, yaw).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentDistribution {
    pub offset_mean: Vec3,
    pub offset_std: Vec3,
    pub range_mean: Vec3,
    pub range_std: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationDistribution {
    pub exercise_id: String,
    pub class_label: Label,
    pub segments: BTreeMap<String, SegmentDistribution>,
}

impl AugmentationDistribution {
    pub fn validate(&self) -> Result<()> {
        for (seg, d) in &self.segments {
            let all = d
                .offset_mean
                .iter()
                .chain(&d.offset_std)
                .chain(&d.range_mean)
                .chain(&d.range_std);
            let bad = all.clone().any(|v| !v.is_finite())
                || d.offset_std.iter().chain(&d.range_std).any(|&s| s < 0.0)
                || d.range_mean.iter().any(|&m| m < 0.0);
            if bad {
                return Err(Error::Config(format!(
                    "distribution {}/{}/{seg}: parameters must be finite with non-negative std and range mean",
                    self.exercise_id, self.class_label
                )));
            }
        }
        Ok(())
    }
}

/// Distributions for every (exercise, class) group; the on-disk format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSet {
    pub schema_version: u32,
    pub distributions: Vec<AugmentationDistribution>,
}

impl DistributionSet {
    pub fn get(&self, exercise_id: &str, class: Label) -> Option<&AugmentationDistribution> {
        self.distributions
            .iter()
            .find(|d| d.exercise_id == exercise_id && d.class_label == class)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != DISTRIBUTION_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "distribution schema version {} not supported (expected {DISTRIBUTION_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        for (i, d) in self.distributions.iter().enumerate() {
            d.validate()?;
            if self.distributions[..i]
                .iter()
                .any(|o| o.exercise_id == d.exercise_id && o.class_label == d.class_label)
            {
                return Err(Error::Config(format!(
                    "duplicate distribution group {}/{}",
                    d.exercise_id, d.class_label
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: DistributionSet =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        set.validate()?;
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("distributions serialize");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Replaces or adds the groups of `overrides` (e.g. expert-specified
    /// parameters for groups with too little data).
    pub fn merged_with(&self, overrides: &DistributionSet) -> DistributionSet {
        let mut out = self.clone();
        for d in &overrides.distributions {
            out.distributions
                .retain(|o| !(o.exercise_id == d.exercise_id && o.class_label == d.class_label));
            out.distributions.push(d.clone());
        }
        out.distributions
            .sort_by(|a, b| (&a.exercise_id, a.class_label).cmp(&(&b.exercise_id, b.class_label)));
        out
    }
}

/// Unwrapped Z-Y-X Euler angles of a trajectory and the number of frames
/// that fell into gimbal lock.
pub fn euler_track(traj: &OrientationTrajectory) -> Result<(Vec<EulerAngles>, usize)> {
    let mut degenerate = 0;
    let mut raw = Vec::with_capacity(traj.len());
    for &q in traj.samples() {
        let d = quat_to_euler(q)?;
        degenerate += usize::from(d.degenerate);
        raw.push(d.angles);
    }
    Ok((unwrap_euler_track(&raw), degenerate))
}

/// First-frame angles and per-axis max - min of an unwrapped track.
pub fn offset_and_range(track: &[EulerAngles]) -> (Vec3, Vec3) {
    let first = track[0].to_array();
    let mut lo = first;
    let mut hi = first;
    for e in track {
        for (axis, v) in e.to_array().into_iter().enumerate() {
            lo[axis] = lo[axis].min(v);
            hi[axis] = hi[axis].max(v);
        }
    }
    (first, [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]])
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per (exercise, class, segment) mean and population standard deviation of
/// first-frame Euler angles and Euler ranges.
pub fn estimate_distributions(reps: &[Repetition]) -> Result<DistributionSet> {
    // (exercise, class) -> segment -> [(offset, range)]
    let mut groups: BTreeMap<(&str, Label), BTreeMap<&str, Vec<(Vec3, Vec3)>>> = BTreeMap::new();
    for rep in reps {
        let group = groups.entry((&rep.exercise_id, rep.label)).or_default();
        for traj in rep.trajectories() {
            let (track, _) = euler_track(traj)?;
            group
                .entry(traj.segment_id())
                .or_default()
                .push(offset_and_range(&track));
        }
    }
    let mut distributions = Vec::with_capacity(groups.len());
    for ((exercise, class), segments) in groups {
        let mut out = BTreeMap::new();
        for (segment, samples) in segments {
            if samples.len() < 2 {
                return Err(Error::InsufficientData {
                    group: format!("{exercise}/class {class}/{segment}"),
                    count: samples.len(),
                    needed: 2,
                });
            }
            let mut d = SegmentDistribution {
                offset_mean: [0.0; 3],
                offset_std: [0.0; 3],
                range_mean: [0.0; 3],
                range_std: [0.0; 3],
            };
            for axis in 0..3 {
                let offsets: Vec<f64> = samples.iter().map(|s| s.0[axis]).collect();
                let ranges: Vec<f64> = samples.iter().map(|s| s.1[axis]).collect();
                (d.offset_mean[axis], d.offset_std[axis]) = mean_std(&offsets);
                (d.range_mean[axis], d.range_std[axis]) = mean_std(&ranges);
            }
            out.insert(segment.to_string(), d);
        }
        distributions.push(AugmentationDistribution {
            exercise_id: exercise.to_string(),
            class_label: class,
            segments: out,
        });
    }
    Ok(DistributionSet {
        schema_version: DISTRIBUTION_SCHEMA_VERSION,
        distributions,
    })
}

/// Target initial posture `beta` and target range `delta` for one segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentParams {
    pub beta: Vec3,
    pub delta: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AugmentationParams {
    pub segments: BTreeMap<String, SegmentParams>,
}

/// Draws `beta` and `delta` per segment from independent normals; negative
/// `delta` components are clamped to zero.
pub fn sample_params<R: Rng + ?Sized>(
    dist: &AugmentationDistribution,
    rng: &mut R,
) -> AugmentationParams {
    let mut draw = |mean: f64, std: f64| {
        Normal::new(mean, std)
            .expect("validated distribution has finite non-negative std")
            .sample(rng)
    };
    let segments = dist
        .segments
        .iter()
        .map(|(seg, d)| {
            let mut p = SegmentParams {
                beta: [0.0; 3],
                delta: [0.0; 3],
            };
            for axis in 0..3 {
                p.beta[axis] = draw(d.offset_mean[axis], d.offset_std[axis]);
                p.delta[axis] = draw(d.range_mean[axis], d.range_std[axis]).max(0.0);
            }
            (seg.clone(), p)
        })
        .collect();
    AugmentationParams { segments }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTrajectory {
    pub trajectory: OrientationTrajectory,
    /// Augmented (unwrapped) Euler angles before conversion to quaternions.
    pub euler: Vec<EulerAngles>,
    pub alpha: Vec3,
    /// Axes whose source range was below [`STATIC_RANGE_EPS`]; they get alpha = 1.
    pub static_axes: [bool; 3],
    /// Frames of the source that were in gimbal lock.
    pub gimbal_frames: usize,
}

impl AugmentedTrajectory {
    /// Every axis static: only the offset was applied.
    pub fn is_degenerate(&self) -> bool {
        self.static_axes.iter().all(|&s| s)
    }
}

/// Scale factor `delta / range` for one axis, and whether the axis is static
/// (range below [`STATIC_RANGE_EPS`], scale 1).
pub fn axis_scale(delta: f64, range: f64) -> (f64, bool) {
    if range < STATIC_RANGE_EPS {
        (1.0, true)
    } else {
        (delta / range, false)
    }
}

/// `e_aug[t] = (e[t] - e[0]) * alpha + beta` per Euler axis with
/// `alpha = delta / (max e - min e)`.
pub fn augment_trajectory(
    traj: &OrientationTrajectory,
    params: &SegmentParams,
) -> Result<AugmentedTrajectory> {
    if traj.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "trajectory {} needs at least 2 samples",
            traj.segment_id()
        )));
    }
    let finite = params
        .beta
        .iter()
        .chain(&params.delta)
        .all(|v| v.is_finite());
    if !finite || params.delta.iter().any(|&d| d < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "augmentation parameters for {} must be finite with delta >= 0",
            traj.segment_id()
        )));
    }
    let (track, gimbal_frames) = euler_track(traj)?;
    let (first, range) = offset_and_range(&track);
    let mut alpha = [1.0; 3];
    let mut static_axes = [false; 3];
    for axis in 0..3 {
        (alpha[axis], static_axes[axis]) = axis_scale(params.delta[axis], range[axis]);
    }
    let mut euler = Vec::with_capacity(track.len());
    let mut samples = Vec::with_capacity(track.len());
    for e in &track {
        let e = e.to_array();
        let mut out = [0.0; 3];
        for axis in 0..3 {
            out[axis] = (e[axis] - first[axis]) * alpha[axis] + params.beta[axis];
        }
        let angles = EulerAngles::from_array(out);
        samples.push(euler_to_quat(angles)?);
        euler.push(angles);
    }
    Ok(AugmentedTrajectory {
        trajectory: OrientationTrajectory::new(traj.segment_id(), traj.sample_rate(), samples)?,
        euler,
        alpha,
        static_axes,
        gimbal_frames,
    })
}
