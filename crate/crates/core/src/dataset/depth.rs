//! 16-bit single-channel depth PNGs.

use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::visibility::DepthMap;

use super::DatasetError;

/// Reads a 16-bit depth PNG; each raw value is divided by `scale` to give
/// meters. Raw 0 stays 0 (missing).
pub fn load_depth_png(path: &Path, scale: f64) -> Result<DepthMap, DatasetError> {
    let img = image::open(path)
        .map_err(|e| DatasetError::Image {
            path: path.display().to_string(),
            message: e.to_string(),
        })?
        .into_luma16();
    let (w, h) = img.dimensions();
    let values = img.into_raw().into_iter().map(|v| (v as f64 / scale) as f32).collect();
    DepthMap::new(w, h, values).map_err(|e| DatasetError::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes meters as raw units (`round(d * scale)`, clamped to the u16 range;
/// invalid values become 0).
pub fn write_depth_png(path: &Path, depth: &DepthMap, scale: f64) -> Result<(), DatasetError> {
    let raw: Vec<u16> = depth
        .values()
        .iter()
        .map(|&d| {
            let d = d as f64;
            if d.is_finite() && d > 0.0 {
                (d * scale).round().clamp(0.0, u16::MAX as f64) as u16
            } else {
                0
            }
        })
        .collect();
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width(), depth.height(), raw).expect("buffer length matches dimensions");
    img.save(path).map_err(|e| DatasetError::Image {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
