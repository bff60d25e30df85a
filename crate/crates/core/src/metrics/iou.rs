//! Exact volume IoU of oriented boxes by convex-polytope clipping.

use std::cmp::Ordering;

use crate::geometry::{Box3D, Vec3};

use super::MetricsError;

/// Boxes with any extent below this are rejected.
pub const MIN_EXTENT: f64 = 1e-9;

const PLANE_EPS: f64 = 1e-10;

/// Convex polyhedron stored as a list of planar faces.
#[derive(Debug, Clone)]
struct Polytope {
    faces: Vec<Vec<Vec3>>,
}

impl Polytope {
    fn from_box(b: &Box3D) -> Self {
        let c = b.corners();
        // Corner index bits are (x, y, z); each face fixes one bit.
        const FACES: [[usize; 4]; 6] = [
            [0, 1, 3, 2],
            [4, 6, 7, 5],
            [0, 4, 5, 1],
            [2, 3, 7, 6],
            [0, 2, 6, 4],
            [1, 5, 7, 3],
        ];
        Self {
            faces: FACES.iter().map(|f| f.iter().map(|&i| c[i]).collect()).collect(),
        }
    }

    /// Keeps the part with `n . x <= d`.
    fn clip(&self, n: &Vec3, d: f64) -> Polytope {
        let mut faces = Vec::with_capacity(self.faces.len() + 1);
        let mut cap: Vec<Vec3> = Vec::new();
        let mut coplanar_face = false;
        for face in &self.faces {
            if face.iter().all(|p| (n.dot(p) - d).abs() <= PLANE_EPS) {
                // Already bounded by this plane; a cap would duplicate the face.
                coplanar_face = true;
                faces.push(face.clone());
                continue;
            }
            let mut out = Vec::with_capacity(face.len() + 2);
            for i in 0..face.len() {
                let p = face[i];
                let q = face[(i + 1) % face.len()];
                let dp = n.dot(&p) - d;
                let dq = n.dot(&q) - d;
                let p_in = dp <= PLANE_EPS;
                let q_in = dq <= PLANE_EPS;
                if p_in {
                    out.push(p);
                    if dp.abs() <= PLANE_EPS {
                        cap.push(p);
                    }
                }
                if p_in != q_in {
                    let t = dp / (dp - dq);
                    let x = p + (q - p) * t;
                    out.push(x);
                    cap.push(x);
                }
            }
            if out.len() >= 3 {
                faces.push(out);
            }
        }
        if cap.len() >= 3 && !coplanar_face {
            faces.push(order_on_plane(cap, n));
        }
        Polytope { faces }
    }

    fn volume(&self) -> f64 {
        let mut count = 0usize;
        let mut centroid = Vec3::zeros();
        for f in &self.faces {
            for p in f {
                centroid += p;
                count += 1;
            }
        }
        if count == 0 {
            return 0.0;
        }
        centroid /= count as f64;
        let mut vol = 0.0;
        for f in &self.faces {
            let a = f[0] - centroid;
            for w in f[1..].windows(2) {
                let b = w[0] - centroid;
                let c = w[1] - centroid;
                vol += a.dot(&b.cross(&c)).abs();
            }
        }
        vol / 6.0
    }
}

/// Sorts coplanar points by angle around their mean.
fn order_on_plane(mut pts: Vec<Vec3>, n: &Vec3) -> Vec<Vec3> {
    let mean = pts.iter().fold(Vec3::zeros(), |acc, p| acc + p) / pts.len() as f64;
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    let angle = |p: &Vec3| {
        let r = p - mean;
        r.dot(&v).atan2(r.dot(&u))
    };
    pts.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
    pts
}

fn check_extent(b: &Box3D) -> Result<(), MetricsError> {
    if b.size().iter().any(|s| *s < MIN_EXTENT) {
        return Err(MetricsError::DegenerateBox {
            label: b.label.clone(),
        });
    }
    Ok(())
}

/// Total order on box geometry, used to make `iou3d` bitwise symmetric.
fn geometry_cmp(a: &Box3D, b: &Box3D) -> Ordering {
    for (x, y) in a.values().iter().zip(b.values().iter()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn axis_aligned(b: &Box3D) -> bool {
    b.angles.is_zero()
}

/// Intersection volume of two boxes.
pub fn intersection_volume(a: &Box3D, b: &Box3D) -> Result<f64, MetricsError> {
    check_extent(a)?;
    check_extent(b)?;
    let (a, b) = match geometry_cmp(a, b) {
        Ordering::Greater => (b, a),
        Ordering::Equal => return Ok(a.volume()),
        Ordering::Less => (a, b),
    };
    if (a.center - b.center).norm() > a.bounding_radius() + b.bounding_radius() {
        return Ok(0.0);
    }
    if axis_aligned(a) && axis_aligned(b) {
        let mut v = 1.0;
        for k in 0..3 {
            let lo = (a.center[k] - a.size()[k] / 2.0).max(b.center[k] - b.size()[k] / 2.0);
            let hi = (a.center[k] + a.size()[k] / 2.0).min(b.center[k] + b.size()[k] / 2.0);
            if hi <= lo {
                return Ok(0.0);
            }
            v *= hi - lo;
        }
        return Ok(v);
    }
    let rot = b.rotation();
    let half = b.size() / 2.0;
    let mut poly = Polytope::from_box(a);
    for k in 0..3 {
        let axis: Vec3 = rot.column(k).into();
        let off = axis.dot(&b.center);
        poly = poly.clip(&axis, off + half[k]);
        poly = poly.clip(&-axis, -off + half[k]);
        if poly.faces.is_empty() {
            return Ok(0.0);
        }
    }
    Ok(poly.volume())
}

/// Volume intersection-over-union of two oriented boxes, in `[0, 1]`.
///
/// The result is bitwise symmetric in its arguments.
pub fn iou3d(a: &Box3D, b: &Box3D) -> Result<f64, MetricsError> {
    let inter = intersection_volume(a, b)?;
    if inter <= 0.0 {
        return Ok(0.0);
    }
    let union = a.volume() + b.volume() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}

/// IoU matrix with `preds` on rows and `gts` on columns.
pub fn iou_matrix(preds: &[Box3D], gts: &[Box3D]) -> Result<Vec<Vec<f64>>, MetricsError> {
    preds
        .iter()
        .map(|p| gts.iter().map(|g| iou3d(p, g)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EulerAngles, Pose};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(c: [f64; 3], s: [f64; 3], a: [f64; 3]) -> Box3D {
        Box3D::new(Vec3::from(c), Vec3::from(s), EulerAngles::new(a[0], a[1], a[2]), "x").unwrap()
    }

    /// Independent oracle: uniform samples inside the smaller box, counted
    /// against the other box's membership test.
    fn mc_iou(a: &Box3D, b: &Box3D, n: usize, seed: u64) -> f64 {
        let (small, other) = if a.volume() <= b.volume() { (a, b) } else { (b, a) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rot = small.rotation();
        let mut hits = 0usize;
        for _ in 0..n {
            let local = Vec3::new(
                (rng.random::<f64>() - 0.5) * small.size().x,
                (rng.random::<f64>() - 0.5) * small.size().y,
                (rng.random::<f64>() - 0.5) * small.size().z,
            );
            if other.contains_point(&(small.center + rot * local)) {
                hits += 1;
            }
        }
        let inter = small.volume() * hits as f64 / n as f64;
        inter / (a.volume() + b.volume() - inter)
    }

    #[test]
    fn identical_boxes() {
        let b = cube([0.1, 0.2, 3.0], [0.5, 1.0, 2.0], [0.1, -0.3, 0.2]);
        assert_eq!(iou3d(&b, &b).unwrap(), 1.0);
        let aa = cube([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0; 3]);
        assert_eq!(iou3d(&aa, &aa).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_boxes() {
        let a = cube([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0; 3]);
        let b = cube([10.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.2, 0.1, 0.0]);
        assert_eq!(iou3d(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn half_offset_cubes() {
        // Analytic: overlap 0.5, union 1.5.
        let a = cube([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0; 3]);
        let b = cube([0.5, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0; 3]);
        assert!((iou3d(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn clipping_path_matches_analytic_offset() {
        // Same configuration pushed through the polytope path by a full-turn roll.
        let a = cube([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0, 0.0, 1.0]);
        let b = cube([0.5, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0; 3]);
        assert!((iou3d(&a, &b).unwrap() - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn nested_box() {
        let outer = cube([0.0, 0.0, 0.0], [2.0, 2.0, 2.0], [0.0, 0.25, 0.0]);
        let inner = cube([0.0, 0.0, 0.0], [0.5, 0.5, 0.5], [0.1, 0.0, 0.3]);
        assert!((iou3d(&outer, &inner).unwrap() - 0.125 / 8.0).abs() < 1e-9);
    }

    #[test]
    fn rotated_square_in_square() {
        // A 45° yawed unit cube against itself unrotated: the overlap is a
        // regular octagon prism of area 2(sqrt2 - 1).
        let a = cube([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0; 3]);
        let b = cube([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0, 0.25, 0.0]);
        let inter = 2.0 * (2f64.sqrt() - 1.0);
        assert!((iou3d(&a, &b).unwrap() - inter / (2.0 - inter)).abs() < 1e-9);
    }

    #[test]
    fn degenerate_box_rejected() {
        let thin = cube([0.0, 0.0, 0.0], [1.0, 1e-12, 1.0], [0.0; 3]);
        let b = cube([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [0.0; 3]);
        assert!(matches!(iou3d(&thin, &b), Err(MetricsError::DegenerateBox { .. })));
    }

    #[test]
    fn monte_carlo_spot_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 0..20 {
            let mut r = |lo: f64, hi: f64| rng.random_range(lo..hi);
            let a = cube([0.0, 0.0, 0.0], [r(0.3, 2.0), r(0.3, 2.0), r(0.3, 2.0)], [r(-1.0, 1.0), r(-0.45, 0.45), r(-1.0, 1.0)]);
            let b = cube(
                [r(-0.6, 0.6), r(-0.6, 0.6), r(-0.6, 0.6)],
                [r(0.3, 2.0), r(0.3, 2.0), r(0.3, 2.0)],
                [r(-1.0, 1.0), r(-0.45, 0.45), r(-1.0, 1.0)],
            );
            let exact = iou3d(&a, &b).unwrap();
            let mc = mc_iou(&a, &b, 200_000, i);
            assert!((exact - mc).abs() < 1e-2, "pair {i}: exact {exact} mc {mc}");
        }
    }

    fn arb_box() -> impl Strategy<Value = Box3D> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            prop::array::uniform3(0.2f64..2.0),
            (-1.0f64..1.0, -0.45f64..0.45, -1.0f64..1.0),
        )
            .prop_map(|(c, s, (p, y, r))| cube(c, s, [p, y, r]))
    }

    proptest! {
        #[test]
        fn symmetric_bitwise(a in arb_box(), b in arb_box()) {
            prop_assert_eq!(iou3d(&a, &b).unwrap().to_bits(), iou3d(&b, &a).unwrap().to_bits());
        }

        #[test]
        fn bounded(a in arb_box(), b in arb_box()) {
            let v = iou3d(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn rigid_motion_invariant(
            a in arb_box(),
            b in arb_box(),
            ang in (-0.4f64..0.4, -0.4f64..0.4, -0.4f64..0.4),
            t in prop::array::uniform3(-3.0f64..3.0),
        ) {
            let pose = Pose::from_euler(&EulerAngles::new(ang.0, ang.1, ang.2), Vec3::from(t));
            let (Ok(ta), Ok(tb)) = (crate::geometry::transform_box(&a, &pose), crate::geometry::transform_box(&b, &pose)) else {
                return Ok(());
            };
            let before = iou3d(&a, &b).unwrap();
            let after = iou3d(&ta, &tb).unwrap();
            prop_assert!((before - after).abs() < 1e-6, "{} vs {}", before, after);
        }
    }
}
