//! Sensor-to-segment calibration from a static window.
//!
//! The offset maps IMU orientations into the segment frame:
//! `segment = offset * imu`. It is chosen so that the mean IMU orientation of
//! the static window maps onto a caller-supplied reference orientation
//! (identity = segment axes aligned with the lab axes in neutral stance).

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::rotation::{OrientationTrajectory, Quaternion};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFrameOffset {
    pub segment_id: String,
    pub offset: Quaternion,
}

impl SegmentFrameOffset {
    pub fn identity(segment_id: impl Into<String>) -> Self {
        SegmentFrameOffset {
            segment_id: segment_id.into(),
            offset: Quaternion::IDENTITY,
        }
    }

    pub fn inverse(&self) -> Self {
        SegmentFrameOffset {
            segment_id: self.segment_id.clone(),
            offset: self.offset.conjugate(),
        }
    }
}

/// Normalized component-wise mean of hemisphere-aligned quaternions.
pub fn mean_orientation(samples: &[Quaternion]) -> Result<Quaternion> {
    let Some(&first) = samples.first() else {
        return Err(Error::InvalidArgument(
            "cannot average zero orientations".into(),
        ));
    };
    let mut acc = [0.0; 4];
    for q in samples {
        let q = q.aligned_with(first);
        acc[0] += q.w;
        acc[1] += q.x;
        acc[2] += q.y;
        acc[3] += q.z;
    }
    Ok(Quaternion::from_array(acc).try_normalized()?.canonical())
}

pub fn compute_offset(
    imu_traj: &OrientationTrajectory,
    static_window: Range<usize>,
    reference: Quaternion,
) -> Result<SegmentFrameOffset> {
    if static_window.is_empty() || static_window.end > imu_traj.len() {
        return Err(Error::InvalidArgument(format!(
            "static window {static_window:?} invalid for segment {} with {} samples",
            imu_traj.segment_id(),
            imu_traj.len()
        )));
    }
    let reference = reference.check_unit()?;
    let mean = mean_orientation(&imu_traj.samples()[static_window])?;
    Ok(SegmentFrameOffset {
        segment_id: imu_traj.segment_id().to_string(),
        offset: (reference * mean.conjugate()).try_normalized()?.canonical(),
    })
}

pub fn apply_offset(
    offset: &SegmentFrameOffset,
    traj: &OrientationTrajectory,
) -> Result<OrientationTrajectory> {
    if offset.segment_id != traj.segment_id() {
        return Err(Error::InvalidArgument(format!(
            "offset for segment {} applied to trajectory of segment {}",
            offset.segment_id,
            traj.segment_id()
        )));
    }
    let samples = traj.samples().iter().map(|&q| offset.offset * q).collect();
    OrientationTrajectory::new(traj.segment_id(), traj.sample_rate(), samples)
}
