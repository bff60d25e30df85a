use serde::{Deserialize, Serialize};

use super::rotation::{euler_to_matrix, matrix_to_euler, EulerAngles};
use super::{GeometryError, Mat3, Pose, Vec3};

/// Oriented 9-DoF box in camera coordinates.
///
/// `size` holds the extents along the box's own X (front), Y (down) and
/// Z (side) axes. Values are kept at full precision; two-decimal rounding
/// happens only when the box is written out as an annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct Box3D {
    pub center: Vec3,
    size: Vec3,
    pub angles: EulerAngles,
    pub label: String,
}

impl Box3D {
    pub fn new(
        center: Vec3,
        size: Vec3,
        angles: EulerAngles,
        label: impl Into<String>,
    ) -> Result<Self, GeometryError> {
        if !size.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(GeometryError::InvalidBox(format!(
                "size components must be positive, got [{}, {}, {}]",
                size.x, size.y, size.z
            )));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidBox("center must be finite".into()));
        }
        if !angles.is_within_range() {
            return Err(GeometryError::InvalidBox(format!(
                "normalized angles must lie in [-1, 1], got {:?}",
                angles
            )));
        }
        Ok(Self {
            center,
            size,
            angles,
            label: label.into(),
        })
    }

    /// Parses the nine-number `[x, y, z, xl, yl, zl, pitch, yaw, roll]` layout.
    pub fn from_bbox_3d(values: &[f64], label: impl Into<String>) -> Result<Self, GeometryError> {
        let v: &[f64; 9] = values.try_into().map_err(|_| {
            GeometryError::InvalidBox(format!("expected 9 numbers, got {}", values.len()))
        })?;
        Self::new(
            Vec3::new(v[0], v[1], v[2]),
            Vec3::new(v[3], v[4], v[5]),
            EulerAngles::new(v[6], v[7], v[8]),
            label,
        )
    }

    /// The nine-number layout rounded to two decimals.
    pub fn to_bbox_3d(&self) -> [f64; 9] {
        self.values().map(round2)
    }

    /// The nine-number layout at full precision.
    pub fn values(&self) -> [f64; 9] {
        let (c, s, a) = (&self.center, &self.size, &self.angles);
        [c.x, c.y, c.z, s.x, s.y, s.z, a.pitch, a.yaw, a.roll]
    }

    pub fn size(&self) -> &Vec3 {
        &self.size
    }

    pub fn rotation(&self) -> Mat3 {
        euler_to_matrix(&self.angles)
    }

    pub fn volume(&self) -> f64 {
        self.size.x * self.size.y * self.size.z
    }

    /// Radius of the sphere around `center` enclosing the box.
    pub fn bounding_radius(&self) -> f64 {
        self.size.norm() / 2.0
    }

    /// The eight corners. Corner `i` uses sign `-` or `+` on local X, Y, Z
    /// according to bits 2, 1 and 0 of `i` respectively (bit set means `+`).
    pub fn corners(&self) -> [Vec3; 8] {
        let rot = self.rotation();
        let half = self.size / 2.0;
        std::array::from_fn(|i| {
            let sx = if i & 4 != 0 { 1.0 } else { -1.0 };
            let sy = if i & 2 != 0 { 1.0 } else { -1.0 };
            let sz = if i & 1 != 0 { 1.0 } else { -1.0 };
            self.center + rot * Vec3::new(sx * half.x, sy * half.y, sz * half.z)
        })
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        let local = self.rotation().transpose() * (p - self.center);
        let half = self.size / 2.0;
        local.x.abs() <= half.x && local.y.abs() <= half.y && local.z.abs() <= half.z
    }
}

/// Re-expresses `bx` through `pose`: the center moves rigidly, the size is
/// kept and the angles are recomputed from the composed rotation.
pub fn transform_box(bx: &Box3D, pose: &Pose) -> Result<Box3D, GeometryError> {
    if pose.is_exact_identity() {
        return Ok(bx.clone());
    }
    let rot = pose.rotation() * bx.rotation();
    Ok(Box3D {
        center: pose.transform_point(&bx.center),
        size: bx.size,
        angles: matrix_to_euler(&rot)?,
        label: bx.label.clone(),
    })
}

/// Rounds to two decimals, normalizing `-0.0` to `0.0`.
pub fn round2(x: f64) -> f64 {
    let r = (x * 100.0).round() / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    center: [f64; 3],
    size: [f64; 3],
    angles: [f64; 3],
    label: String,
}

impl TryFrom<RawBox> for Box3D {
    type Error = GeometryError;

    fn try_from(r: RawBox) -> Result<Self, Self::Error> {
        Box3D::new(
            Vec3::from(r.center),
            Vec3::from(r.size),
            EulerAngles::new(r.angles[0], r.angles[1], r.angles[2]),
            r.label,
        )
    }
}

impl From<Box3D> for RawBox {
    fn from(b: Box3D) -> Self {
        RawBox {
            center: [b.center.x, b.center.y, b.center.z],
            size: [b.size.x, b.size.y, b.size.z],
            angles: [b.angles.pitch, b.angles.yaw, b.angles.roll],
            label: b.label,
        }
    }
}
