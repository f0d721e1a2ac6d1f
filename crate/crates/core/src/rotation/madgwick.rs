//! Gradient-descent attitude filter for gyroscope + accelerometer input.

use super::{norm3, Quaternion, Vec3};
use crate::{Error, Result};

pub const DEFAULT_MADGWICK_BETA: f64 = 0.033;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    /// Angular rate in the sensor frame, rad/s.
    pub gyro: Vec3,
    /// Specific force in the sensor frame, m/s^2.
    pub accel: Vec3,
    /// Time since the previous sample, s.
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterStep {
    pub orientation: Quaternion,
    /// The accelerometer vector was zero, so only the gyro was integrated.
    pub accel_skipped: bool,
}

/// One filter update. The state maps sensor-frame vectors to the earth frame
/// (z up), so a static sensor at `state` measures `state* (0,0,g) state`.
pub fn madgwick_update(state: Quaternion, sample: &ImuSample, beta: f64) -> Result<FilterStep> {
    let q = state.check_unit()?;
    if !(sample.dt.is_finite() && sample.dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample interval {} must be positive",
            sample.dt
        )));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "filter gain {beta} must be >= 0"
        )));
    }
    let [gx, gy, gz] = sample.gyro;
    let Quaternion {
        w: q0,
        x: q1,
        y: q2,
        z: q3,
    } = q;

    // Rate of change from the gyroscope: 0.5 * q (x) (0, omega).
    let mut dot = [
        0.5 * (-q1 * gx - q2 * gy - q3 * gz),
        0.5 * (q0 * gx + q2 * gz - q3 * gy),
        0.5 * (q0 * gy - q1 * gz + q3 * gx),
        0.5 * (q0 * gz + q1 * gy - q2 * gx),
    ];

    let a_norm = norm3(sample.accel);
    let accel_skipped = !(a_norm.is_finite() && a_norm > 0.0);
    if !accel_skipped {
        let [ax, ay, az] = [
            sample.accel[0] / a_norm,
            sample.accel[1] / a_norm,
            sample.accel[2] / a_norm,
        ];
        // Objective: predicted gravity direction minus measured direction.
        let f = [
            2.0 * (q1 * q3 - q0 * q2) - ax,
            2.0 * (q0 * q1 + q2 * q3) - ay,
            2.0 * (0.5 - q1 * q1 - q2 * q2) - az,
        ];
        // Jacobian transpose times objective.
        let step = [
            -2.0 * q2 * f[0] + 2.0 * q1 * f[1],
            2.0 * q3 * f[0] + 2.0 * q0 * f[1] - 4.0 * q1 * f[2],
            -2.0 * q0 * f[0] + 2.0 * q3 * f[1] - 4.0 * q2 * f[2],
            2.0 * q1 * f[0] + 2.0 * q2 * f[1],
        ];
        let n = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        if n > 0.0 {
            for (d, s) in dot.iter_mut().zip(step) {
                *d -= beta * s / n;
            }
        }
    }

    let next = Quaternion::new(
        q0 + dot[0] * sample.dt,
        q1 + dot[1] * sample.dt,
        q2 + dot[2] * sample.dt,
        q3 + dot[3] * sample.dt,
    );
    Ok(FilterStep {
        orientation: next.try_normalized()?.canonical(),
        accel_skipped,
    })
}

/// Orientation with zero yaw whose predicted gravity matches `accel`.
pub fn tilt_from_accel(accel: Vec3) -> Quaternion {
    let n = norm3(accel);
    if !(n.is_finite() && n > 0.0) {
        return Quaternion::IDENTITY;
    }
    let roll = accel[1].atan2(accel[2]);
    let pitch = (-accel[0] / n).clamp(-1.0, 1.0).asin();
    super::euler_to_quat(super::EulerAngles::new(roll, pitch, 0.0)).unwrap_or_default()
}

/// Runs the filter over a sample stream. The first output is the filter state
/// after the first sample; the initial state defaults to the accelerometer
/// tilt of the first sample. Returns orientations and per-sample skip flags.
pub fn estimate_orientation(
    samples: &[ImuSample],
    beta: f64,
    initial: Option<Quaternion>,
) -> Result<(Vec<Quaternion>, Vec<bool>)> {
    let Some(first) = samples.first() else {
        return Ok((Vec::new(), Vec::new()));
    };
    let mut state = initial.unwrap_or_else(|| tilt_from_accel(first.accel));
    let mut out = Vec::with_capacity(samples.len());
    let mut flags = Vec::with_capacity(samples.len());
    for s in samples {
        let step = madgwick_update(state, s, beta)?;
        state = step.orientation;
        out.push(state);
        flags.push(step.accel_skipped);
    }
    Ok((out, flags))
}
