use serde::{Deserialize, Serialize};

use super::rotation::{euler_to_matrix, is_rotation, EulerAngles};
use super::{GeometryError, Mat3, Vec3};

const ROTATION_TOL: f64 = 1e-6;

/// Rigid transform `p' = R p + t`. Which frames it maps between is stated by
/// the owner (e.g. `world_from_camera`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose", into = "RawPose")]
pub struct Pose {
    rotation: Mat3,
    translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        if !is_rotation(&rotation, ROTATION_TOL) || !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NotARotation);
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_euler(angles: &EulerAngles, translation: Vec3) -> Self {
        Self {
            rotation: euler_to_matrix(angles),
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Bitwise identity; used to short-circuit no-op transforms.
    pub fn is_exact_identity(&self) -> bool {
        self.rotation == Mat3::identity() && self.translation == Vec3::zeros()
    }
}

#[derive(Serialize, Deserialize)]
struct RawPose {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl TryFrom<RawPose> for Pose {
    type Error = GeometryError;

    fn try_from(raw: RawPose) -> Result<Self, Self::Error> {
        let r = raw.rotation;
        Pose::new(
            Mat3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            ),
            Vec3::from(raw.translation),
        )
    }
}

impl From<Pose> for RawPose {
    fn from(p: Pose) -> Self {
        let m = p.rotation;
        RawPose {
            rotation: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
            translation: [p.translation.x, p.translation.y, p.translation.z],
        }
    }
}
