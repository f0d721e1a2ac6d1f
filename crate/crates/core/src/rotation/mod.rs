//! Quaternion and Euler-angle mathematics.
//!
//! Quaternions are Hamilton quaternions `w + xi + yj + zk`. A unit quaternion
//! `q` maps a vector `v` from the body frame into the reference frame via
//! `q v q*`. Euler angles use the intrinsic Z-Y-X (yaw, pitch, roll) sequence,
//! i.e. `q = Rz(yaw) * Ry(pitch) * Rx(roll)`.

mod madgwick;
mod trajectory;

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::{Mul, Neg};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use madgwick::{
    estimate_orientation, madgwick_update, tilt_from_accel, FilterStep, ImuSample,
    DEFAULT_MADGWICK_BETA,
};
pub use trajectory::{resample_trajectory, OrientationTrajectory};

pub type Vec3 = [f64; 3];

/// Norm deviation above which an input is rejected as not being a rotation.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// Pitch distance from +-pi/2 below which the Euler decomposition is treated
/// as gimbal locked.
pub const GIMBAL_TOLERANCE: f64 = 1e-6;

/// Below this 4-vector angle SLERP falls back to normalized linear interpolation.
const SLERP_LINEAR_THRESHOLD: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Raw constructor; no normalization is applied.
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    /// A zero axis yields the identity.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = norm3(axis);
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (angle * 0.5).sin_cos();
        Quaternion::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n).canonical()
    }

    /// Exponential map of a rotation vector (axis times angle).
    pub fn from_rotation_vector(v: Vec3) -> Self {
        let angle = norm3(v);
        if angle < 1e-12 {
            return Quaternion::new(1.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2])
                .try_normalized()
                .unwrap_or(Self::IDENTITY);
        }
        Self::from_axis_angle(v, angle)
    }

    /// Logarithm map: the shortest rotation vector representing `self`.
    pub fn rotation_vector(self) -> Vec3 {
        let q = self.canonical();
        let s = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
        if s < 1e-15 {
            return [2.0 * q.x, 2.0 * q.y, 2.0 * q.z];
        }
        let angle = 2.0 * s.atan2(q.w);
        [q.x / s * angle, q.y / s * angle, q.z / s * angle]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(self, other: Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn conjugate(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Sign-flipped so that `w >= 0`.
    pub fn canonical(self) -> Self {
        if self.w < 0.0 {
            -self
        } else {
            self
        }
    }

    /// `self` or `-self`, whichever lies in the same hemisphere as `reference`.
    pub fn aligned_with(self, reference: Quaternion) -> Self {
        if self.dot(reference) < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn try_normalized(self) -> Result<Self> {
        let n = self.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidRotation(format!(
                "cannot normalize quaternion {:?}",
                self.to_array()
            )));
        }
        Ok(Quaternion::new(
            self.w / n,
            self.x / n,
            self.y / n,
            self.z / n,
        ))
    }

    pub fn is_unit(self, tolerance: f64) -> bool {
        let n = self.norm();
        n.is_finite() && (n - 1.0).abs() <= tolerance
    }

    pub fn check_unit(self) -> Result<Self> {
        if self.is_unit(UNIT_TOLERANCE) {
            Ok(self)
        } else {
            Err(Error::InvalidRotation(format!(
                "quaternion {:?} has norm {}",
                self.to_array(),
                self.norm()
            )))
        }
    }

    /// Geodesic angle between the rotations represented by `self` and `other`,
    /// in `[0, pi]`; insensitive to quaternion sign.
    pub fn angle_to(self, other: Quaternion) -> f64 {
        let d = self.conjugate() * other;
        let v = (d.x * d.x + d.y * d.y + d.z * d.z).sqrt();
        2.0 * v.atan2(d.w.abs())
    }

    /// Rotates `v` from the body frame into the reference frame.
    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = [self.x, self.y, self.z];
        let t = scale3(cross3(u, v), 2.0);
        add3(add3(v, scale3(t, self.w)), cross3(u, t))
    }

    /// Rotation matrix with `m[row][col]`, mapping body to reference frame.
    pub fn to_matrix(self) -> [[f64; 3]; 3] {
        let Quaternion { w, x, y, z } = self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product; `a * b` applies `b` first, then `a`.
    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion::new(-self.w, -self.x, -self.y, -self.z)
    }
}

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        EulerAngles { roll, pitch, yaw }
    }

    pub fn from_array(a: Vec3) -> Self {
        EulerAngles::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> Vec3 {
        [self.roll, self.pitch, self.yaw]
    }

    pub fn is_finite(self) -> bool {
        self.roll.is_finite() && self.pitch.is_finite() && self.yaw.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerDecomposition {
    pub angles: EulerAngles,
    /// Pitch within [`GIMBAL_TOLERANCE`] of +-pi/2; roll was folded into yaw.
    pub degenerate: bool,
}

pub fn quat_to_euler(q: Quaternion) -> Result<EulerDecomposition> {
    let q = q.check_unit()?.try_normalized()?;
    let Quaternion { w, x, y, z } = q;
    let sin_pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0);
    let pitch = sin_pitch.asin();
    if FRAC_PI_2 - pitch.abs() < GIMBAL_TOLERANCE {
        // Only yaw - roll (pitch > 0) or yaw + roll (pitch < 0) is observable.
        let yaw = (2.0 * (w * z - x * y)).atan2(1.0 - 2.0 * (x * x + z * z));
        return Ok(EulerDecomposition {
            angles: EulerAngles::new(0.0, pitch, yaw),
            degenerate: true,
        });
    }
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    Ok(EulerDecomposition {
        angles: EulerAngles::new(roll, pitch, yaw),
        degenerate: false,
    })
}

pub fn euler_to_quat(e: EulerAngles) -> Result<Quaternion> {
    if !e.is_finite() {
        return Err(Error::InvalidAngle(format!(
            "non-finite Euler angles {e:?}"
        )));
    }
    let (sr, cr) = (0.5 * e.roll).sin_cos();
    let (sp, cp) = (0.5 * e.pitch).sin_cos();
    let (sy, cy) = (0.5 * e.yaw).sin_cos();
    let q = Quaternion::new(
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    );
    Ok(q.try_normalized()?.canonical())
}

/// Spherical linear interpolation with internal hemisphere alignment.
pub fn slerp(q0: Quaternion, q1: Quaternion, t: f64) -> Result<Quaternion> {
    q0.check_unit()?;
    q1.check_unit()?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "interpolation fraction {t} outside [0, 1]"
        )));
    }
    Ok(slerp_unchecked(q0, q1, t).canonical())
}

/// SLERP without validation or sign canonicalization; the result stays in the
/// hemisphere of `q0`.
pub(crate) fn slerp_unchecked(q0: Quaternion, q1: Quaternion, t: f64) -> Quaternion {
    let q1 = q1.aligned_with(q0);
    if t == 0.0 {
        return q0;
    }
    if t == 1.0 {
        return q1;
    }
    let diff = norm4(q1.w - q0.w, q1.x - q0.x, q1.y - q0.y, q1.z - q0.z);
    let sum = norm4(q1.w + q0.w, q1.x + q0.x, q1.y + q0.y, q1.z + q0.z);
    let omega = 2.0 * diff.atan2(sum);
    let (a, b) = if omega < SLERP_LINEAR_THRESHOLD {
        (1.0 - t, t)
    } else {
        let s = omega.sin();
        (((1.0 - t) * omega).sin() / s, (t * omega).sin() / s)
    };
    let q = Quaternion::new(
        a * q0.w + b * q1.w,
        a * q0.x + b * q1.x,
        a * q0.y + b * q1.y,
        a * q0.z + b * q1.z,
    );
    let n = q.norm();
    Quaternion::new(q.w / n, q.x / n, q.y / n, q.z / n)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a - TAU * (a / TAU).round();
    if r <= -PI {
        r + TAU
    } else if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Removes 2*pi jumps per axis so successive differences stay within pi.
pub fn unwrap_euler_track(angles: &[EulerAngles]) -> Vec<EulerAngles> {
    let mut out = Vec::with_capacity(angles.len());
    let Some(&first) = angles.first() else {
        return out;
    };
    out.push(first);
    let mut prev = first.to_array();
    for e in &angles[1..] {
        let raw = e.to_array();
        let mut next = [0.0; 3];
        for axis in 0..3 {
            let turns = ((prev[axis] - raw[axis]) / TAU).round();
            next[axis] = raw[axis] + turns * TAU;
        }
        out.push(EulerAngles::from_array(next));
        prev = next;
    }
    out
}

pub(crate) fn norm3(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn norm4(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (a * a + b * b + c * c + d * d).sqrt()
}

pub(crate) fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn scale3(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[cfg(test)]
mod tests;
