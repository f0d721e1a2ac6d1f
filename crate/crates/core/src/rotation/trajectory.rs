use super::{slerp_unchecked, Quaternion};
use crate::{Error, Result};

/// Orientation samples of one body segment at a fixed sample rate.
///
/// Samples are unit quaternions and consecutive samples lie in the same
/// hemisphere (non-negative dot product). Construction enforces both.
#[derive(Debug, Clone, PartialEq)]
pub struct OrientationTrajectory {
    segment_id: String,
    sample_rate: f64,
    samples: Vec<Quaternion>,
}

impl OrientationTrajectory {
    /// Validates the samples and flips signs where needed so that neighbors
    /// are hemisphere-aligned. Values are otherwise stored as given.
    pub fn new(
        segment_id: impl Into<String>,
        sample_rate: f64,
        samples: Vec<Quaternion>,
    ) -> Result<Self> {
        let segment_id = segment_id.into();
        if samples.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "trajectory for segment {segment_id} has {} sample(s), need at least 2",
                samples.len()
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sample rate {sample_rate} must be positive"
            )));
        }
        let mut aligned = Vec::with_capacity(samples.len());
        for (i, q) in samples.into_iter().enumerate() {
            q.check_unit().map_err(|e| {
                Error::InvalidRotation(format!("segment {segment_id}, sample {i}: {e}"))
            })?;
            let q = match aligned.last() {
                Some(&prev) => q.aligned_with(prev),
                None => q,
            };
            aligned.push(q);
        }
        Ok(OrientationTrajectory {
            segment_id,
            sample_rate,
            samples: aligned,
        })
    }

    /// Same samples under a different segment id.
    pub fn renamed(mut self, segment_id: impl Into<String>) -> Self {
        self.segment_id = segment_id.into();
        self
    }

    pub fn segment_id(&self) -> &str {
        &self.segment_id
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[Quaternion] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Quaternion {
        self.samples[0]
    }

    pub fn into_samples(self) -> Vec<Quaternion> {
        self.samples
    }
}

/// Resamples to exactly `n` samples at linearly spaced normalized times.
///
/// Endpoints are copied bit-for-bit; interior samples are SLERPed between the
/// bracketing input samples. The sample rate is scaled so the duration is kept.
pub fn resample_trajectory(
    traj: &OrientationTrajectory,
    n: usize,
) -> Result<OrientationTrajectory> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot resample to {n} sample(s), need at least 2"
        )));
    }
    let src = traj.samples();
    let len = src.len();
    if n == len {
        return Ok(traj.clone());
    }
    let span = (n - 1) as u64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Integer position keeps grid points that coincide with input samples exact.
        let num = i as u64 * (len - 1) as u64;
        let k = (num / span) as usize;
        let rem = num % span;
        let q = if rem == 0 {
            src[k]
        } else {
            slerp_unchecked(src[k], src[k + 1], rem as f64 / span as f64)
        };
        out.push(q);
    }
    let rate = traj.sample_rate() * (n - 1) as f64 / (len - 1) as f64;
    OrientationTrajectory::new(traj.segment_id(), rate, out)
}
