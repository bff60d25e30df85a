use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Pinhole camera without distortion. Pixels are square; a pixel with integer
/// index `i` covers `[i, i + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub principal_point: (f64, f64),
}

impl CameraModel {
    /// Camera with the principal point at the exact image center.
    pub fn new(width: u32, height: u32, focal: f64) -> Result<Self, GeometryError> {
        Self::with_principal_point(width, height, focal, (width as f64 / 2.0, height as f64 / 2.0))
    }

    pub fn with_principal_point(
        width: u32,
        height: u32,
        focal: f64,
        principal_point: (f64, f64),
    ) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidCamera(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(focal.is_finite() && focal > 0.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "focal length must be positive, got {focal}"
            )));
        }
        if !(principal_point.0.is_finite() && principal_point.1.is_finite()) {
            return Err(GeometryError::InvalidCamera("principal point must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            focal,
            principal_point,
        })
    }

    /// Camera whose focal length reproduces the given horizontal FoV.
    pub fn from_hfov_degrees(width: u32, height: u32, hfov_deg: f64) -> Result<Self, GeometryError> {
        if !(hfov_deg > 0.0 && hfov_deg < 180.0) {
            return Err(GeometryError::InvalidCamera(format!(
                "horizontal fov must lie in (0, 180), got {hfov_deg}"
            )));
        }
        let focal = width as f64 / (2.0 * (hfov_deg.to_radians() / 2.0).tan());
        Self::new(width, height, focal)
    }

    /// Horizontal field of view in radians, `2 atan(W / 2f)`.
    pub fn hfov(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.focal)).atan()
    }

    /// Vertical field of view in radians, `2 atan(H / 2f)`.
    pub fn vfov(&self) -> f64 {
        2.0 * (self.height as f64 / (2.0 * self.focal)).atan()
    }

    pub fn hfov_degrees(&self) -> f64 {
        self.hfov().to_degrees()
    }

    pub fn vfov_degrees(&self) -> f64 {
        self.vfov().to_degrees()
    }

    pub fn contains(&self, px: &Pixel) -> bool {
        px.u >= 0.0 && px.u < self.width as f64 && px.v >= 0.0 && px.v < self.height as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Image(Pixel),
    /// The point has `z <= 0` in camera coordinates.
    Behind,
}

impl Projection {
    pub fn pixel(self) -> Option<Pixel> {
        match self {
            Projection::Image(px) => Some(px),
            Projection::Behind => None,
        }
    }
}

pub fn project_point(cam: &CameraModel, p: &Vec3) -> Projection {
    if p.z <= 0.0 {
        return Projection::Behind;
    }
    let (cx, cy) = cam.principal_point;
    Projection::Image(Pixel::new(cam.focal * p.x / p.z + cx, cam.focal * p.y / p.z + cy))
}

/// Back-projects a pixel at the given depth (distance along the optical axis).
pub fn unproject_pixel(cam: &CameraModel, px: &Pixel, depth: f64) -> Result<Vec3, GeometryError> {
    if !(depth > 0.0) {
        return Err(GeometryError::NonPositiveDepth(depth));
    }
    let (cx, cy) = cam.principal_point;
    Ok(Vec3::new(
        (px.u - cx) * depth / cam.focal,
        (px.v - cy) * depth / cam.focal,
        depth,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optical_axis_hits_principal_point() {
        let cam = CameraModel::new(640, 480, 500.0).unwrap();
        let px = project_point(&cam, &Vec3::new(0.0, 0.0, 2.0)).pixel().unwrap();
        assert_eq!(px, Pixel::new(320.0, 240.0));
    }

    #[test]
    fn behind_camera() {
        let cam = CameraModel::new(640, 480, 500.0).unwrap();
        assert_eq!(project_point(&cam, &Vec3::new(0.0, 0.0, -1.0)), Projection::Behind);
        assert_eq!(project_point(&cam, &Vec3::new(1.0, 0.0, 0.0)), Projection::Behind);
    }

    #[test]
    fn axes_point_right_and_down() {
        let cam = CameraModel::new(640, 480, 500.0).unwrap();
        let c = project_point(&cam, &Vec3::new(0.0, 0.0, 3.0)).pixel().unwrap();
        let r = project_point(&cam, &Vec3::new(1.0, 0.0, 3.0)).pixel().unwrap();
        let d = project_point(&cam, &Vec3::new(0.0, 1.0, 3.0)).pixel().unwrap();
        assert!(r.u > c.u);
        assert!(d.v > c.v);
    }

    #[test]
    fn sample_intrinsics_projection() {
        // f = 959 / (2 tan(34.58°)); frozen from an independent evaluation.
        let cam = CameraModel::from_hfov_degrees(959, 696, 69.16).unwrap();
        assert!((cam.focal - 695.5941672783265).abs() < 1e-9);
        let px = project_point(&cam, &Vec3::new(1.0, 0.0, 2.0)).pixel().unwrap();
        assert!((px.u - 827.2970836391632).abs() < 1e-9);
        assert!((px.v - 348.0).abs() < 1e-12);
    }

    #[test]
    fn unproject_center_and_errors() {
        let cam = CameraModel::new(640, 480, 500.0).unwrap();
        let p = unproject_pixel(&cam, &Pixel::new(320.0, 240.0), 1.0).unwrap();
        assert_eq!(p, Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(
            unproject_pixel(&cam, &Pixel::new(1.0, 1.0), 0.0),
            Err(GeometryError::NonPositiveDepth(0.0))
        );
        assert!(unproject_pixel(&cam, &Pixel::new(1.0, 1.0), f64::NAN).is_err());
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraModel::new(0, 10, 1.0).is_err());
        assert!(CameraModel::new(10, 10, 0.0).is_err());
        assert!(CameraModel::new(10, 10, -3.0).is_err());
        assert!(CameraModel::from_hfov_degrees(10, 10, 180.0).is_err());
    }

    #[test]
    fn fov_in_open_interval() {
        let cam = CameraModel::new(4000, 3000, 1.0).unwrap();
        assert!(cam.hfov() > 0.0 && cam.hfov() < std::f64::consts::PI);
    }
}
