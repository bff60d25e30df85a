//! Field-of-view unification: every frame is virtually re-imaged at one shared
//! focal length while keeping its original horizontal and vertical FoV.
//!
//! Only geometry is computed here. Resampling pixels is left to callers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::CameraModel;

/// Default unified focal length in pixels.
pub const DEFAULT_F_NEW: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FovError {
    #[error("unified focal length must be positive, got {0}")]
    InvalidFocal(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifyResult {
    pub new_width: u32,
    pub new_height: u32,
    /// Real-valued target width before integer rounding.
    pub exact_width: f64,
    pub exact_height: f64,
    pub scale_x: f64,
    pub scale_y: f64,
    pub new_cam: CameraModel,
}

impl UnifyResult {
    /// Upper bound on the horizontal FoV change introduced by rounding the
    /// width to an integer (mean value theorem on `2 atan(W / 2f)`).
    pub fn hfov_rounding_bound(&self) -> f64 {
        rounding_bound(self.exact_width, self.new_width, self.new_cam.focal)
    }

    pub fn vfov_rounding_bound(&self) -> f64 {
        rounding_bound(self.exact_height, self.new_height, self.new_cam.focal)
    }
}

fn rounding_bound(exact: f64, rounded: u32, focal: f64) -> f64 {
    let lo = exact.min(rounded as f64);
    let slope = (1.0 / focal) / (1.0 + (lo / (2.0 * focal)).powi(2));
    slope * (exact - rounded as f64).abs()
}

pub fn unify_fov(cam: &CameraModel, f_new: f64) -> Result<UnifyResult, FovError> {
    if !(f_new.is_finite() && f_new > 0.0) {
        return Err(FovError::InvalidFocal(f_new));
    }
    let hfov = 2.0 * (cam.width as f64 / (2.0 * cam.focal)).atan();
    let vfov = 2.0 * (cam.height as f64 / (2.0 * cam.focal)).atan();
    let exact_width = 2.0 * f_new * (hfov / 2.0).tan();
    let exact_height = 2.0 * f_new * (vfov / 2.0).tan();

    let (new_width, new_height) = if f_new == cam.focal {
        (cam.width, cam.height)
    } else {
        (round_dim(exact_width), round_dim(exact_height))
    };
    let scale_x = new_width as f64 / cam.width as f64;
    let scale_y = new_height as f64 / cam.height as f64;
    let (cx, cy) = cam.principal_point;
    let new_cam = CameraModel {
        width: new_width,
        height: new_height,
        focal: f_new,
        principal_point: (cx * scale_x, cy * scale_y),
    };
    Ok(UnifyResult {
        new_width,
        new_height,
        exact_width,
        exact_height,
        scale_x,
        scale_y,
        new_cam,
    })
}

fn round_dim(x: f64) -> u32 {
    (x.round() as u32).max(1)
}

/// Pixel-space geometry that follows an image resize.
pub trait Rescale: Sized {
    /// Multiplies coordinates by the scales and clamps to `[0, width] x [0, height]`.
    fn rescale(&self, scale_x: f64, scale_y: f64, width: u32, height: u32) -> Self;
}

/// Axis-aligned 2D box `[x1, y1, x2, y2]` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2D(pub [f64; 4]);

impl Box2D {
    pub fn area(&self) -> f64 {
        let [x1, y1, x2, y2] = self.0;
        (x2 - x1).max(0.0) * (y2 - y1).max(0.0)
    }

    /// Integer pixel coordinates, as written into prompts.
    pub fn to_int(&self) -> [i64; 4] {
        self.0.map(|v| v.round() as i64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D(pub [f64; 2]);

impl Point2D {
    pub fn to_int(&self) -> [i64; 2] {
        self.0.map(|v| v.round() as i64)
    }
}

impl Rescale for Box2D {
    fn rescale(&self, sx: f64, sy: f64, width: u32, height: u32) -> Self {
        let [x1, y1, x2, y2] = self.0;
        let (w, h) = (width as f64, height as f64);
        Box2D([
            (x1 * sx).clamp(0.0, w),
            (y1 * sy).clamp(0.0, h),
            (x2 * sx).clamp(0.0, w),
            (y2 * sy).clamp(0.0, h),
        ])
    }
}

impl Rescale for Point2D {
    fn rescale(&self, sx: f64, sy: f64, width: u32, height: u32) -> Self {
        let [x, y] = self.0;
        Point2D([(x * sx).clamp(0.0, width as f64), (y * sy).clamp(0.0, height as f64)])
    }
}

pub fn rescale_2d<T: Rescale>(items: &[T], unify: &UnifyResult) -> Vec<T> {
    items
        .iter()
        .map(|g| g.rescale(unify.scale_x, unify.scale_y, unify.new_width, unify.new_height))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Box3D, EulerAngles, Vec3};

    #[test]
    fn same_focal_is_identity() {
        let cam = CameraModel::new(640, 480, 525.0).unwrap();
        let r = unify_fov(&cam, 525.0).unwrap();
        assert_eq!((r.new_width, r.new_height), (640, 480));
        assert_eq!((r.scale_x, r.scale_y), (1.0, 1.0));
        assert_eq!(r.new_cam, cam);
    }

    #[test]
    fn sample_intrinsics_golden() {
        // Frozen from an independent evaluation: W_new = 689.3387301911328,
        // H_new = 500.291716593356.
        let cam = CameraModel::from_hfov_degrees(959, 696, 69.16).unwrap();
        let r = unify_fov(&cam, 500.0).unwrap();
        assert!((r.exact_width - 689.3387301911328).abs() < 1e-9);
        assert!((r.exact_height - 500.291716593356).abs() < 1e-9);
        assert_eq!((r.new_width, r.new_height), (689, 500));
        assert_eq!(r.new_cam.focal, 500.0);
    }

    #[test]
    fn exact_fov_preserved_before_rounding() {
        let cam = CameraModel::new(1296, 968, 1170.2).unwrap();
        let r = unify_fov(&cam, 500.0).unwrap();
        assert!((2.0 * (r.exact_width / 1000.0).atan() - cam.hfov()).abs() < 1e-9);
        assert!((2.0 * (r.exact_height / 1000.0).atan() - cam.vfov()).abs() < 1e-9);
        assert!((r.new_cam.hfov() - cam.hfov()).abs() <= r.hfov_rounding_bound() + 1e-12);
    }

    #[test]
    fn invalid_focal() {
        let cam = CameraModel::new(10, 10, 5.0).unwrap();
        assert_eq!(unify_fov(&cam, 0.0), Err(FovError::InvalidFocal(0.0)));
        assert!(unify_fov(&cam, -1.0).is_err());
        assert!(unify_fov(&cam, f64::NAN).is_err());
    }

    #[test]
    fn rescale_box_and_identity() {
        let b = Box2D([0.0, 0.0, 100.0, 100.0]);
        assert_eq!(b.rescale(0.5, 0.5, 1000, 1000), Box2D([0.0, 0.0, 50.0, 50.0]));
        assert_eq!(b.rescale(1.0, 1.0, 1000, 1000), b);
        assert_eq!(b.rescale(2.0, 2.0, 150, 120), Box2D([0.0, 0.0, 150.0, 120.0]));
    }

    #[test]
    fn boxes_3d_untouched() {
        // Unification acts on image geometry only; the 3D annotation is not an input.
        let b = Box3D::new(Vec3::new(0.1, 0.2, 2.0), Vec3::new(1.0, 1.0, 1.0), EulerAngles::ZERO, "x")
            .unwrap();
        let before = b.clone();
        let cam = CameraModel::new(640, 480, 600.0).unwrap();
        let _ = unify_fov(&cam, 500.0).unwrap();
        assert_eq!(b, before);
    }
}
