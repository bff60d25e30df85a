//! Euler angles, rotation matrices and quaternions.
//!
//! Angles are stored normalized: the stored value times 180 gives degrees.
//! Composition order is intrinsic X (pitch), then Y (yaw), then Z (roll), so
//! `R = Rx(pitch) * Ry(yaw) * Rz(roll)`. The columns of `R` are the box axes
//! expressed in camera coordinates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{GeometryError, Mat3};

/// Normalized-angle distance from ±0.5 (±90° yaw) below which the
/// decomposition is reported as gimbal-locked.
pub const GIMBAL_LOCK_EPS: f64 = 1e-6;

/// Pitch, yaw and roll as fractions of 180°.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

impl EulerAngles {
    pub const ZERO: EulerAngles = EulerAngles {
        pitch: 0.0,
        yaw: 0.0,
        roll: 0.0,
    };

    pub fn new(pitch: f64, yaw: f64, roll: f64) -> Self {
        Self { pitch, yaw, roll }
    }

    pub fn from_degrees(pitch: f64, yaw: f64, roll: f64) -> Self {
        Self::new(pitch / 180.0, yaw / 180.0, roll / 180.0)
    }

    pub fn from_radians(pitch: f64, yaw: f64, roll: f64) -> Self {
        Self::new(pitch / PI, yaw / PI, roll / PI)
    }

    /// `[pitch, yaw, roll]` in radians.
    pub fn to_radians(&self) -> [f64; 3] {
        [self.pitch * PI, self.yaw * PI, self.roll * PI]
    }

    /// `[pitch, yaw, roll]` in degrees.
    pub fn to_degrees(&self) -> [f64; 3] {
        [self.pitch * 180.0, self.yaw * 180.0, self.roll * 180.0]
    }

    pub fn is_within_range(&self) -> bool {
        [self.pitch, self.yaw, self.roll]
            .iter()
            .all(|a| a.is_finite() && (-1.0..=1.0).contains(a))
    }

    pub fn is_zero(&self) -> bool {
        self.pitch == 0.0 && self.yaw == 0.0 && self.roll == 0.0
    }
}

pub fn rot_x(rad: f64) -> Mat3 {
    let (s, c) = rad.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(rad: f64) -> Mat3 {
    let (s, c) = rad.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(rad: f64) -> Mat3 {
    let (s, c) = rad.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation matrix for the given angles, `Rx * Ry * Rz`.
pub fn euler_to_matrix(angles: &EulerAngles) -> Mat3 {
    let [p, y, r] = angles.to_radians();
    rot_x(p) * rot_y(y) * rot_z(r)
}

/// Inverse of [`euler_to_matrix`].
///
/// Fails with [`GeometryError::GimbalLock`] when the yaw is within
/// [`GIMBAL_LOCK_EPS`] of ±0.5; the error carries the canonical solution with
/// roll fixed to zero and pitch absorbing the remaining rotation.
pub fn matrix_to_euler(rot: &Mat3) -> Result<EulerAngles, GeometryError> {
    let sy = rot[(0, 2)].clamp(-1.0, 1.0);
    let yaw = sy.asin();
    if (yaw.abs() / PI - 0.5).abs() < GIMBAL_LOCK_EPS {
        return Err(GeometryError::GimbalLock {
            canonical: gimbal_branch(rot, sy),
        });
    }
    let pitch = (-rot[(1, 2)]).atan2(rot[(2, 2)]);
    let roll = (-rot[(0, 1)]).atan2(rot[(0, 0)]);
    Ok(EulerAngles::from_radians(pitch, yaw, roll))
}

/// Same as [`matrix_to_euler`] but resolves gimbal lock to the canonical branch.
pub fn matrix_to_euler_canonical(rot: &Mat3) -> EulerAngles {
    match matrix_to_euler(rot) {
        Ok(a) => a,
        Err(GeometryError::GimbalLock { canonical }) => canonical,
        Err(_) => unreachable!("matrix_to_euler only fails on gimbal lock"),
    }
}

fn gimbal_branch(rot: &Mat3, sy: f64) -> EulerAngles {
    // With yaw = ±90° only pitch ± roll is observable; put it all in pitch.
    let phase = rot[(1, 0)].atan2(rot[(1, 1)]);
    if sy > 0.0 {
        EulerAngles::from_radians(phase, PI / 2.0, 0.0)
    } else {
        EulerAngles::from_radians(-phase, -PI / 2.0, 0.0)
    }
}

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_axis_angle(axis: [f64; 3], rad: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (s, c) = (rad / 2.0).sin_cos();
        Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Quaternion) -> Quaternion {
        let (a, b) = (self, rhs);
        Quaternion::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn to_matrix(&self) -> Mat3 {
        let Quaternion { w, x, y, z } = *self;
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// True when both quaternions encode the same rotation (q and -q).
    pub fn same_rotation(&self, other: &Quaternion, tol: f64) -> bool {
        let dot = self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z;
        (dot.abs() - 1.0).abs() <= tol
    }
}

pub fn euler_to_quaternion(angles: &EulerAngles) -> Quaternion {
    let [p, y, r] = angles.to_radians();
    let qx = Quaternion::from_axis_angle([1.0, 0.0, 0.0], p);
    let qy = Quaternion::from_axis_angle([0.0, 1.0, 0.0], y);
    let qz = Quaternion::from_axis_angle([0.0, 0.0, 1.0], r);
    qx.mul(&qy).mul(&qz).normalized()
}

/// Checks `R^T R = I` and `det R = +1` within `tol`.
pub fn is_rotation(rot: &Mat3, tol: f64) -> bool {
    let should_be_identity = rot.transpose() * rot;
    (should_be_identity - Mat3::identity()).amax() <= tol && (rot.determinant() - 1.0).abs() <= tol
}
