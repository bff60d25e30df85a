//! Depth-based visibility of 3D points and multi-view point correspondences.
//!
//! A point is visible in a frame when it projects inside the image, lies in
//! front of the camera, and its depth agrees with the recorded depth map to
//! within a relative tolerance.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraModel, Pixel, Pose, Vec3};

pub const DEFAULT_REL_TOL: f64 = 0.05;
pub const DEFAULT_POINTS_PER_INSTANCE: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VisibilityError {
    #[error("instance has no points")]
    EmptyInstance,
    #[error("sample count must be at least 1")]
    ZeroCount,
    #[error("depth map is {got:?} but camera is {want:?}")]
    DimensionMismatch { got: (u32, u32), want: (u32, u32) },
    #[error("depth map has {got} values, expected {want}")]
    BadLength { got: usize, want: usize },
}

/// Per-pixel depth along the optical axis in meters, row-major. Values that
/// are zero, negative or non-finite mark missing depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthMap {
    width: u32,
    height: u32,
    values: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, values: Vec<f32>) -> Result<Self, VisibilityError> {
        let want = width as usize * height as usize;
        if values.len() != want {
            return Err(VisibilityError::BadLength {
                got: values.len(),
                want,
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> f32) -> Self {
        let mut values = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> Option<f32> {
        (x < self.width && y < self.height).then(|| self.values[y as usize * self.width as usize + x as usize])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VisibilityStatus {
    Visible,
    OutOfBounds,
    BehindCamera,
    Occluded,
    NoDepth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilityVerdict {
    pub status: VisibilityStatus,
    /// Projected pixel, when a projection exists.
    pub pixel: Option<Pixel>,
    /// Depth of the point in camera coordinates.
    pub z: f64,
}

impl VisibilityVerdict {
    pub fn is_visible(&self) -> bool {
        self.status == VisibilityStatus::Visible
    }
}

/// One camera view: `world_from_camera` pose, intrinsics and depth.
#[derive(Debug, Clone, Copy)]
pub struct FrameView<'a> {
    pub pose: &'a Pose,
    pub cam: &'a CameraModel,
    pub depth: &'a DepthMap,
}

impl<'a> FrameView<'a> {
    pub fn new(pose: &'a Pose, cam: &'a CameraModel, depth: &'a DepthMap) -> Result<Self, VisibilityError> {
        if (depth.width, depth.height) != (cam.width, cam.height) {
            return Err(VisibilityError::DimensionMismatch {
                got: (depth.width, depth.height),
                want: (cam.width, cam.height),
            });
        }
        Ok(Self { pose, cam, depth })
    }
}

/// Tests a world point against one frame. Checks run in a fixed order:
/// image bounds, positive depth, then the relative depth gap
/// `|z - d| / z > rel_tol` against the nearest depth-map pixel.
pub fn check_visibility(
    p_world: &Vec3,
    pose: &Pose,
    cam: &CameraModel,
    depth: &DepthMap,
    rel_tol: f64,
) -> VisibilityVerdict {
    let p = pose.inverse().transform_point(p_world);
    check_camera_point(&p, cam, depth, rel_tol)
}

/// Same as [`check_visibility`] for a point already in camera coordinates.
pub fn check_camera_point(p: &Vec3, cam: &CameraModel, depth: &DepthMap, rel_tol: f64) -> VisibilityVerdict {
    let z = p.z;
    let verdict = |status, pixel| VisibilityVerdict { status, pixel, z };
    if z == 0.0 || !z.is_finite() {
        return verdict(VisibilityStatus::BehindCamera, None);
    }
    let (cx, cy) = cam.principal_point;
    let px = Pixel::new(cam.focal * p.x / z + cx, cam.focal * p.y / z + cy);
    if !cam.contains(&px) {
        return verdict(VisibilityStatus::OutOfBounds, Some(px));
    }
    if z < 0.0 {
        return verdict(VisibilityStatus::BehindCamera, Some(px));
    }
    let d = depth
        .get(px.u.floor() as u32, px.v.floor() as u32)
        .map(f64::from)
        .filter(|d| d.is_finite() && *d > 0.0);
    let Some(d) = d else {
        return verdict(VisibilityStatus::NoDepth, Some(px));
    };
    if (z - d).abs() / z > rel_tol {
        return verdict(VisibilityStatus::Occluded, Some(px));
    }
    verdict(VisibilityStatus::Visible, Some(px))
}

/// Draws `n` points uniformly: without replacement when the instance has at
/// least `n` points, with replacement otherwise.
pub fn sample_instance_points(points: &[Vec3], n: usize, seed: u64) -> Result<Vec<Vec3>, VisibilityError> {
    if points.is_empty() {
        return Err(VisibilityError::EmptyInstance);
    }
    if n == 0 {
        return Err(VisibilityError::ZeroCount);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if points.len() >= n {
        Ok(index::sample(&mut rng, points.len(), n).iter().map(|i| points[i]).collect())
    } else {
        Ok((0..n).map(|_| points[rng.random_range(0..points.len())]).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub point: Vec3,
    pub pixel_a: Pixel,
    pub pixel_b: Pixel,
}

/// Samples instance points and keeps those visible in both frames, paired by
/// their shared 3D source point.
pub fn gen_correspondence(
    a: &FrameView,
    b: &FrameView,
    instance: &[Vec3],
    n: usize,
    seed: u64,
    rel_tol: f64,
) -> Vec<Correspondence> {
    let Ok(points) = sample_instance_points(instance, n, seed) else {
        return Vec::new();
    };
    points
        .into_iter()
        .filter_map(|p| {
            let va = check_visibility(&p, a.pose, a.cam, a.depth, rel_tol);
            let vb = check_visibility(&p, b.pose, b.cam, b.depth, rel_tol);
            match (va.is_visible(), vb.is_visible()) {
                (true, true) => Some(Correspondence {
                    point: p,
                    pixel_a: va.pixel?,
                    pixel_b: vb.pixel?,
                }),
                _ => None,
            }
        })
        .collect()
}
