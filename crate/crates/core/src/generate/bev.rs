//! Top-down rendering of box footprints on the frame-1 ground plane.
//!
//! Image right is +X and image up is +Z, so the view is from above with
//! north (+Z) at the top.

use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::dataset::SceneObject;
use crate::geometry::{rot_y, Pose, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BevStyle {
    pub pixels_per_meter: f64,
    /// Blank border around the drawn content, in pixels.
    pub margin: u32,
    pub background: [u8; 3],
    /// Fill colors, cycled by draw order.
    pub palette: Vec<[u8; 3]>,
    /// Draw object ids at footprint centers.
    pub labels: bool,
}

impl Default for BevStyle {
    fn default() -> Self {
        Self {
            pixels_per_meter: 50.0,
            margin: 20,
            background: [255, 255, 255],
            palette: vec![
                [230, 25, 75],
                [60, 180, 75],
                [0, 130, 200],
                [245, 130, 48],
                [145, 30, 180],
                [70, 240, 240],
                [240, 50, 230],
                [210, 245, 60],
                [0, 128, 128],
                [170, 110, 40],
            ],
            labels: true,
        }
    }
}

/// One drawn object: its id, label, fill color and the four footprint
/// corners in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Footprint {
    pub id: u32,
    pub label: String,
    pub color: [u8; 3],
    pub corners: [[f64; 2]; 4],
}

#[derive(Debug, Clone)]
pub struct BevRaster {
    pub image: RgbImage,
    pub meters_per_pixel: f64,
    pub footprints: Vec<Footprint>,
    /// Ground point `(x, z)` at pixel `(0, 0)`.
    pub origin: [f64; 2],
}

impl BevRaster {
    /// Pixel position of a ground point.
    pub fn to_pixel(&self, x: f64, z: f64) -> [f64; 2] {
        [(x - self.origin[0]) / self.meters_per_pixel, (self.origin[1] - z) / self.meters_per_pixel]
    }

    pub fn to_png(&self) -> Result<Vec<u8>, image::ImageError> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.image.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }
}

/// Ground-plane corners `(x, z)` of the yaw-rotated box rectangle.
pub fn footprint_corners(obj: &SceneObject) -> [[f64; 2]; 4] {
    let b = &obj.bbox;
    let r = rot_y(b.angles.yaw * std::f64::consts::PI);
    let (hx, hz) = (b.size().x / 2.0, b.size().z / 2.0);
    [(-hx, -hz), (hx, -hz), (hx, hz), (-hx, hz)].map(|(x, z)| {
        let p = r * Vec3::new(x, 0.0, z) + b.center;
        [p.x, p.z]
    })
}

/// Renders object footprints and camera markers. Cameras are
/// `frame1_from_camera` poses; each gets a square at its center and a short
/// stroke along its viewing direction.
pub fn render_bev(objects: &[SceneObject], cameras: &[Pose], style: &BevStyle) -> BevRaster {
    let ground: Vec<[[f64; 2]; 4]> = objects.iter().map(footprint_corners).collect();
    let mut xs: Vec<f64> = ground.iter().flatten().map(|p| p[0]).collect();
    let mut zs: Vec<f64> = ground.iter().flatten().map(|p| p[1]).collect();
    for c in cameras {
        xs.push(c.translation().x);
        zs.push(c.translation().z);
    }
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    let (xmin, xmax) = (fold(&xs, f64::min, f64::INFINITY), fold(&xs, f64::max, f64::NEG_INFINITY));
    let (zmin, zmax) = (fold(&zs, f64::min, f64::INFINITY), fold(&zs, f64::max, f64::NEG_INFINITY));
    let (xmin, xmax, zmin, zmax) = if xs.is_empty() { (0.0, 0.0, 0.0, 0.0) } else { (xmin, xmax, zmin, zmax) };

    let scale = style.pixels_per_meter;
    let m = style.margin as f64;
    let width = ((xmax - xmin) * scale).ceil() as u32 + 2 * style.margin;
    let height = ((zmax - zmin) * scale).ceil() as u32 + 2 * style.margin;
    let mut raster = BevRaster {
        image: RgbImage::from_pixel(width.max(1), height.max(1), Rgb(style.background)),
        meters_per_pixel: 1.0 / scale,
        footprints: Vec::with_capacity(objects.len()),
        origin: [xmin - m / scale, zmax + m / scale],
    };

    for (i, (obj, corners)) in objects.iter().zip(&ground).enumerate() {
        let color = if style.palette.is_empty() {
            [128, 128, 128]
        } else {
            style.palette[i % style.palette.len()]
        };
        let px = corners.map(|c| raster.to_pixel(c[0], c[1]));
        fill_convex(&mut raster.image, &px, color);
        raster.footprints.push(Footprint {
            id: obj.id,
            label: obj.label.clone(),
            color,
            corners: px,
        });
    }
    if style.labels {
        for f in &raster.footprints {
            let cx = f.corners.iter().map(|c| c[0]).sum::<f64>() / 4.0;
            let cy = f.corners.iter().map(|c| c[1]).sum::<f64>() / 4.0;
            draw_number(&mut raster.image, f.id, cx, cy);
        }
    }
    for c in cameras {
        let t = c.translation();
        let [u, v] = raster.to_pixel(t.x, t.z);
        let fwd = c.rotation() * Vec3::z();
        fill_rect(&mut raster.image, u - 3.0, v - 3.0, 7.0, 7.0, [0, 0, 0]);
        let n = fwd.x.hypot(fwd.z);
        if n > 1e-9 {
            for k in 0..15 {
                let s = k as f64;
                put(&mut raster.image, u + s * fwd.x / n, v - s * fwd.z / n, [0, 0, 0]);
            }
        }
    }
    raster
}

fn put(img: &mut RgbImage, u: f64, v: f64, color: [u8; 3]) {
    if u >= 0.0 && v >= 0.0 && (u as u32) < img.width() && (v as u32) < img.height() {
        img.put_pixel(u as u32, v as u32, Rgb(color));
    }
}

fn fill_rect(img: &mut RgbImage, u: f64, v: f64, w: f64, h: f64, color: [u8; 3]) {
    for j in 0..h as i64 {
        for i in 0..w as i64 {
            put(img, u + i as f64, v + j as f64, color);
        }
    }
}

/// Fills every pixel whose center lies inside the convex polygon.
fn fill_convex(img: &mut RgbImage, poly: &[[f64; 2]; 4], color: [u8; 3]) {
    let umin = poly.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min).floor().max(0.0) as u32;
    let vmin = poly.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min).floor().max(0.0) as u32;
    let umax = (poly.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max).ceil() as u32).min(img.width());
    let vmax = (poly.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max).ceil() as u32).min(img.height());
    for v in vmin..vmax {
        for u in umin..umax {
            if inside(poly, u as f64 + 0.5, v as f64 + 0.5) {
                img.put_pixel(u, v, Rgb(color));
            }
        }
    }
}

/// Point-in-convex-polygon test. A point exactly on an edge counts only
/// when the edge's outward normal points toward -u, or straight toward -v,
/// so pixels on a shared edge go to exactly one of two adjacent polygons.
fn inside(poly: &[[f64; 2]; 4], x: f64, y: f64) -> bool {
    let twice_area: f64 = (0..4)
        .map(|k| {
            let ([ax, ay], [bx, by]) = (poly[k], poly[(k + 1) % 4]);
            ax * by - bx * ay
        })
        .sum();
    let s = twice_area.signum();
    for k in 0..4 {
        let [ax, ay] = poly[k];
        let [bx, by] = poly[(k + 1) % 4];
        let cross = s * ((bx - ax) * (y - ay) - (by - ay) * (x - ax));
        if cross < 0.0 {
            return false;
        }
        if cross == 0.0 {
            let (nx, ny) = (s * (by - ay), -s * (bx - ax));
            if !(nx < 0.0 || (nx == 0.0 && ny < 0.0)) {
                return false;
            }
        }
    }
    true
}

/// 3×5 bitmaps for the digits 0–9, one row per entry, high bit on the left.
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b001, 0b001, 0b001],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];
const GLYPH_SCALE: f64 = 2.0;

fn draw_number(img: &mut RgbImage, n: u32, cx: f64, cy: f64) {
    let text = n.to_string();
    let advance = 4.0 * GLYPH_SCALE;
    let left = cx - advance * text.len() as f64 / 2.0;
    let top = cy - 2.5 * GLYPH_SCALE;
    for (k, ch) in text.bytes().enumerate() {
        let glyph = DIGITS[(ch - b'0') as usize];
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3 {
                if bits & (0b100 >> col) != 0 {
                    let u = left + k as f64 * advance + col as f64 * GLYPH_SCALE;
                    let v = top + row as f64 * GLYPH_SCALE;
                    fill_rect(img, u, v, GLYPH_SCALE, GLYPH_SCALE, [0, 0, 0]);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::fixtures::object;
    use crate::geometry::EulerAngles;

    fn plain() -> BevStyle {
        BevStyle {
            labels: false,
            ..BevStyle::default()
        }
    }

    fn count(img: &RgbImage, color: [u8; 3]) -> usize {
        img.pixels().filter(|p| p.0 == color).count()
    }

    #[test]
    fn unit_box_is_centered_square() {
        let r = render_bev(&[object(1, "cube", [0.0, 0.0, 0.0], [1.0; 3], 1)], &[], &plain());
        assert_eq!((r.image.width(), r.image.height()), (90, 90));
        let c = r.footprints[0].color;
        assert_eq!(count(&r.image, c), 2500);
        assert_eq!(r.image.get_pixel(45, 45).0, c);
        assert_eq!(r.image.get_pixel(19, 45).0, [255, 255, 255]);
        assert_eq!(r.image.get_pixel(20, 45).0, c);
        assert_eq!(r.image.get_pixel(70, 45).0, [255, 255, 255]);
    }

    #[test]
    fn disjoint_boxes_do_not_overlap() {
        let objs = [
            object(1, "a", [0.0, 0.0, 0.0], [1.0; 3], 1),
            object(2, "b", [2.05, 0.0, 1.0], [0.5, 1.0, 0.8], 1),
        ];
        let r = render_bev(&objs, &[], &plain());
        let (ca, cb) = (r.footprints[0].color, r.footprints[1].color);
        assert_eq!(count(&r.image, ca), 2500);
        assert_eq!(count(&r.image, cb), 1000);
    }

    #[test]
    fn rotated_area_within_two_percent() {
        for (yaw, sx, sz) in [(0.1667, 1.3, 0.7), (-0.4, 0.6, 0.9)] {
            let mut o = object(1, "box", [0.3, 0.0, 2.0], [sx, 1.0, sz], 1);
            o.bbox.angles = EulerAngles::new(0.0, yaw, 0.0);
            let r = render_bev(&[o], &[], &plain());
            let area = count(&r.image, r.footprints[0].color) as f64;
            let want = sx * sz * 50.0 * 50.0;
            assert!((area - want).abs() / want < 0.02, "yaw {yaw}: {area} vs {want}");
        }
    }

    proptest::proptest! {
        #[test]
        fn area_oracle(
            cx in -2.0f64..2.0, cz in 0.0f64..5.0, sx in 0.5f64..3.0, sz in 0.5f64..3.0, yaw in -1.0f64..1.0,
        ) {
            let mut o = object(1, "box", [cx, 0.0, cz], [sx, 1.0, sz], 1);
            o.bbox.angles = EulerAngles::new(0.0, yaw, 0.0);
            let r = render_bev(&[o], &[], &plain());
            let area = count(&r.image, r.footprints[0].color) as f64;
            let want = sx * sz * 2500.0;
            proptest::prop_assert!((area - want).abs() / want < 0.02, "{} vs {}", area, want);
        }
    }

    #[test]
    fn north_is_up_and_east_is_right() {
        let objs = [
            object(1, "near", [0.0, 0.0, 0.0], [0.2; 3], 1),
            object(2, "far", [0.0, 0.0, 3.0], [0.2; 3], 1),
            object(3, "right", [2.0, 0.0, 0.0], [0.2; 3], 1),
        ];
        let r = render_bev(&objs, &[], &plain());
        let center = |f: &Footprint| f.corners.iter().fold([0.0, 0.0], |a, c| [a[0] + c[0] / 4.0, a[1] + c[1] / 4.0]);
        let [near, far, right] = [0, 1, 2].map(|i| center(&r.footprints[i]));
        assert!(far[1] < near[1]);
        assert!(right[0] > near[0]);
    }

    #[test]
    fn camera_marker_and_labels_are_drawn() {
        let r = render_bev(
            &[object(7, "cube", [0.0, 0.0, 3.0], [1.0; 3], 1)],
            &[Pose::identity()],
            &BevStyle::default(),
        );
        let [u, v] = r.to_pixel(0.0, 0.0);
        assert_eq!(r.image.get_pixel(u as u32, v as u32).0, [0, 0, 0]);
        let [u, v] = r.to_pixel(0.0, 3.0);
        let black_near_center = (-6..6)
            .flat_map(|du| (-6..6).map(move |dv| (du, dv)))
            .any(|(du, dv)| r.image.get_pixel((u as i64 + du) as u32, (v as i64 + dv) as u32).0 == [0, 0, 0]);
        assert!(black_near_center);
        assert!(r.to_png().unwrap().starts_with(b"\x89PNG"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let objs = [object(1, "a", [0.1, 0.0, 1.0], [0.7, 1.0, 0.3], 1)];
        let a = render_bev(&objs, &[Pose::identity()], &BevStyle::default());
        let b = render_bev(&objs, &[Pose::identity()], &BevStyle::default());
        assert_eq!(a.image.as_raw(), b.image.as_raw());
    }
}
