//! Coordinate conventions, rotations, pinhole projection and 9-DoF boxes.
//!
//! Camera frame: X right, Y down, Z forward along the optical axis.
//! Box frame: X front, Y down, Z side; the box rotation maps box axes into
//! camera axes.

mod bbox;
mod camera;
mod pose;
mod rotation;

use thiserror::Error;

pub use bbox::{round2, transform_box, Box3D};
pub use camera::{project_point, unproject_pixel, CameraModel, Pixel, Projection};
pub use pose::Pose;
pub use rotation::{
    euler_to_matrix, euler_to_quaternion, is_rotation, matrix_to_euler, matrix_to_euler_canonical,
    rot_x, rot_y, rot_z, EulerAngles, Quaternion, GIMBAL_LOCK_EPS,
};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("gimbal lock: yaw is ±90°, pitch and roll are coupled")]
    GimbalLock { canonical: EulerAngles },
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("matrix is not a proper rotation")]
    NotARotation,
}
