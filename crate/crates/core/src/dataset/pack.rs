//! Normalized scenes: every box in frame-1 camera coordinates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::fov::{unify_fov, Box2D, FovError, Point2D, Rescale};
use crate::geometry::{project_point, transform_box, Box3D, CameraModel, EulerAngles, Mat3, Pose, Vec3};
use crate::visibility::{check_visibility, DepthMap, VisibilityStatus, DEFAULT_REL_TOL};

use super::depth::load_depth_png;
use super::manifest::{
    BoxFrame, ManifestBox, ManifestCamera, ManifestFrame, ManifestObject, ManifestPose, ObjectRefs, SceneManifest,
    SCHEMA_VERSION,
};
use super::DatasetError;

pub const DEFAULT_DEPTH_SCALE: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub image: String,
    /// Current intrinsics (after FoV unification, if any).
    pub camera: CameraModel,
    /// Intrinsics of the recorded image, kept once the frame is unified.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_camera: Option<CameraModel>,
    /// `frame1_from_camera`; the first frame is the identity.
    pub pose: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    pub depth_scale: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

impl Frame {
    /// Intrinsics matching the recorded image and depth map.
    pub fn recorded_camera(&self) -> &CameraModel {
        self.original_camera.as_ref().unwrap_or(&self.camera)
    }

    /// Factors mapping recorded pixels to current pixels.
    pub fn pixel_scale(&self) -> (f64, f64) {
        let r = self.recorded_camera();
        (
            self.camera.width as f64 / r.width as f64,
            self.camera.height as f64 / r.height as f64,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub label: String,
    /// Frame-1 camera coordinates.
    pub bbox: Box3D,
    pub in_frames: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appearance: Option<usize>,
    /// Image-space references in recorded pixels of the first frame.
    #[serde(default)]
    pub refs: ObjectRefs,
    /// Instance points in frame-1 coordinates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

impl SceneObject {
    /// Frame index where the object is first seen.
    pub fn first_appearance(&self) -> Option<usize> {
        self.appearance.or_else(|| self.in_frames.iter().position(|f| *f))
    }

    pub fn present_in(&self, frame: usize) -> bool {
        self.in_frames.get(frame).copied().unwrap_or(false)
    }

    pub fn point_cloud(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| Vec3::from(*p)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenePack {
    pub scene_id: String,
    pub source: String,
    pub axis_aligned: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    /// Shared focal length once FoV-unified.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_new: Option<f64>,
    /// Directory that image and depth paths are relative to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
    pub frames: Vec<Frame>,
    pub objects: Vec<SceneObject>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

impl ScenePack {
    pub fn fov_unified(&self) -> bool {
        self.f_new.is_some()
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        match &self.root {
            Some(r) => Path::new(r).join(rel),
            None => PathBuf::from(rel),
        }
    }

    pub fn load_depth(&self, frame: usize) -> Result<Option<DepthMap>, DatasetError> {
        let f = &self.frames[frame];
        f.depth
            .as_ref()
            .map(|d| load_depth_png(&self.resolve(d), f.depth_scale))
            .transpose()
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// 2D box reference in current first-frame pixels.
    pub fn box2d(&self, obj: &SceneObject) -> Option<Box2D> {
        let f = &self.frames[0];
        let (sx, sy) = f.pixel_scale();
        obj.refs.box2d.map(|b| Box2D(b).rescale(sx, sy, f.camera.width, f.camera.height))
    }

    /// Point reference in current first-frame pixels.
    pub fn point2d(&self, obj: &SceneObject) -> Option<Point2D> {
        let f = &self.frames[0];
        let (sx, sy) = f.pixel_scale();
        obj.refs.point.map(|p| Point2D(p).rescale(sx, sy, f.camera.width, f.camera.height))
    }

    /// Writes the pack back as a manifest whose normalization reproduces it.
    pub fn to_manifest(&self) -> SceneManifest {
        let frames = self
            .frames
            .iter()
            .map(|f| {
                let cam = f.recorded_camera();
                let r = f.pose.rotation();
                let t = f.pose.translation();
                ManifestFrame {
                    image: f.image.clone(),
                    camera: ManifestCamera {
                        width: cam.width,
                        height: cam.height,
                        focal: cam.focal,
                        principal_point: Some([cam.principal_point.0, cam.principal_point.1]),
                        extra: BTreeMap::new(),
                    },
                    pose: Some(ManifestPose {
                        rotation: [
                            [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                            [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                            [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
                        ],
                        translation: [t.x, t.y, t.z],
                    }),
                    depth: f.depth.clone(),
                    depth_scale: Some(f.depth_scale),
                    extra: f.extra.clone(),
                }
            })
            .collect();
        let objects = self
            .objects
            .iter()
            .map(|o| {
                let v = o.bbox.values();
                ManifestObject {
                    id: o.id,
                    label: o.label.clone(),
                    bbox: ManifestBox {
                        center: [v[0], v[1], v[2]],
                        size: [v[3], v[4], v[5]],
                        angles: Some([v[6], v[7], v[8]]),
                    },
                    frame: BoxFrame::World,
                    in_frames: Some(o.in_frames.clone()),
                    appearance: o.appearance,
                    refs: (o.refs != ObjectRefs::default()).then(|| o.refs.clone()),
                    points: (!o.points.is_empty()).then(|| o.points.clone()),
                    extra: o.extra.clone(),
                }
            })
            .collect();
        SceneManifest {
            schema_version: SCHEMA_VERSION,
            scene_id: self.scene_id.clone(),
            source: self.source.clone(),
            axis_aligned: self.axis_aligned,
            fps: self.fps,
            frames,
            objects,
            extra: self.extra.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NormalizeOptions {
    /// Directory that relative image and depth paths resolve against.
    pub root: Option<PathBuf>,
    pub rel_tol: f64,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        Self {
            root: None,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

fn manifest_pose(p: &Option<ManifestPose>) -> Pose {
    match p {
        None => Pose::identity(),
        Some(p) => {
            let r = p.rotation;
            Pose::new(
                Mat3::new(
                    r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
                ),
                Vec3::from(p.translation),
            )
            .expect("validated manifest pose")
        }
    }
}

/// Re-expresses a validated manifest in frame-1 coordinates and fills in
/// per-frame presence flags.
///
/// Presence comes from the manifest when given. Otherwise the box center is
/// tested against each frame: with depth, the center must pass the bounds and
/// positive-depth checks and the recorded depth must not lie in front of the
/// box's near extent (a center behind the object's own surface still counts);
/// without depth, a frustum test is used. Objects seen in no frame are dropped.
pub fn normalize(manifest: &SceneManifest, opts: &NormalizeOptions) -> Result<ScenePack, DatasetError> {
    let scene = manifest.scene_id.as_str();
    let geo = |e| DatasetError::Geometry {
        scene: scene.to_owned(),
        source: e,
    };

    let world_from_cam: Vec<Pose> = manifest.frames.iter().map(|f| manifest_pose(&f.pose)).collect();
    let frame1_from_world = if world_from_cam[0].is_exact_identity() {
        Pose::identity()
    } else {
        world_from_cam[0].inverse()
    };
    let rebase = |p: &Pose| {
        if frame1_from_world.is_exact_identity() {
            p.clone()
        } else {
            frame1_from_world.compose(p)
        }
    };

    let mut frames = Vec::with_capacity(manifest.frames.len());
    for (k, f) in manifest.frames.iter().enumerate() {
        let c = &f.camera;
        let pp = c
            .principal_point
            .map(|p| (p[0], p[1]))
            .unwrap_or((c.width as f64 / 2.0, c.height as f64 / 2.0));
        let camera = CameraModel::with_principal_point(c.width, c.height, c.focal, pp).map_err(geo)?;
        frames.push(Frame {
            image: f.image.clone(),
            camera,
            original_camera: None,
            pose: if k == 0 { Pose::identity() } else { rebase(&world_from_cam[k]) },
            depth: f.depth.clone(),
            depth_scale: f.depth_scale.unwrap_or(DEFAULT_DEPTH_SCALE),
            extra: f.extra.clone(),
        });
    }

    let mut pack = ScenePack {
        scene_id: manifest.scene_id.clone(),
        source: manifest.source.clone(),
        axis_aligned: manifest.axis_aligned,
        fps: manifest.fps,
        f_new: None,
        root: opts.root.as_ref().map(|r| r.to_string_lossy().into_owned()),
        frames,
        objects: Vec::new(),
        extra: manifest.extra.clone(),
    };

    let mut depths: Vec<Option<Option<DepthMap>>> = vec![None; pack.frames.len()];
    for o in &manifest.objects {
        let a = o.bbox.angles.unwrap_or([0.0; 3]);
        let raw = Box3D::new(
            Vec3::from(o.bbox.center),
            Vec3::from(o.bbox.size),
            EulerAngles::new(a[0], a[1], a[2]),
            o.label.clone(),
        )
        .map_err(geo)?;
        let to_frame1 = match o.frame {
            BoxFrame::World => frame1_from_world.clone(),
            BoxFrame::Camera(k) => pack.frames[k].pose.clone(),
        };
        let bbox = transform_box(&raw, &to_frame1).map_err(geo)?;
        let points = o
            .points
            .iter()
            .flatten()
            .map(|p| {
                if to_frame1.is_exact_identity() {
                    *p
                } else {
                    let q = to_frame1.transform_point(&Vec3::from(*p));
                    [q.x, q.y, q.z]
                }
            })
            .collect();

        let in_frames = match &o.in_frames {
            Some(flags) => flags.clone(),
            None if pack.frames.len() == 1 => vec![true],
            None => {
                let mut flags = Vec::with_capacity(pack.frames.len());
                for k in 0..pack.frames.len() {
                    if depths[k].is_none() {
                        depths[k] = Some(pack.load_depth(k)?);
                    }
                    let frame = &pack.frames[k];
                    flags.push(center_present(&bbox, frame, depths[k].as_ref().unwrap().as_ref(), opts.rel_tol));
                }
                flags
            }
        };
        if !in_frames.iter().any(|f| *f) {
            continue;
        }
        pack.objects.push(SceneObject {
            id: o.id,
            label: o.label.clone(),
            bbox,
            in_frames,
            appearance: o.appearance,
            refs: o.refs.clone().unwrap_or_default(),
            points,
            extra: o.extra.clone(),
        });
    }
    Ok(pack)
}

fn center_present(bbox: &Box3D, frame: &Frame, depth: Option<&DepthMap>, rel_tol: f64) -> bool {
    let cam = frame.recorded_camera();
    match depth {
        Some(d) if (d.width(), d.height()) == (cam.width, cam.height) => {
            let v = check_visibility(&bbox.center, &frame.pose, cam, d, rel_tol);
            match v.status {
                VisibilityStatus::Visible => true,
                VisibilityStatus::Occluded => {
                    let px = v.pixel.expect("occluded verdicts carry a pixel");
                    let recorded = d.get(px.u.floor() as u32, px.v.floor() as u32).unwrap_or(0.0) as f64;
                    recorded >= (v.z - bbox.bounding_radius()) * (1.0 - rel_tol)
                }
                _ => false,
            }
        }
        _ => {
            let p = frame.pose.inverse().transform_point(&bbox.center);
            project_point(cam, &p).pixel().is_some_and(|px| cam.contains(&px))
        }
    }
}

/// Re-images every frame at focal `f_new`. Boxes are untouched; 2D references
/// follow through [`ScenePack::box2d`] and [`ScenePack::point2d`].
pub fn unify_pack(pack: &ScenePack, f_new: f64) -> Result<ScenePack, FovError> {
    let mut out = pack.clone();
    for f in &mut out.frames {
        let recorded = f.recorded_camera().clone();
        let r = unify_fov(&recorded, f_new)?;
        f.camera = r.new_cam;
        f.original_camera = Some(recorded);
    }
    out.f_new = Some(f_new);
    Ok(out)
}
