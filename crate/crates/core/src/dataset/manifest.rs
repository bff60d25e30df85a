//! The neutral per-scene manifest and its validator.
//!
//! Validation runs on the raw JSON value so every problem is reported with a
//! JSON pointer into the document. Fields not known to this version are kept
//! in `extra` maps and written back unchanged.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geometry::{is_rotation, Mat3};

use super::DatasetError;

pub const SCHEMA_VERSION: u64 = 1;

/// The JSON Schema document describing the manifest format.
pub const MANIFEST_SCHEMA: &str = include_str!("../../schema/scene_manifest.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub schema_version: u64,
    pub scene_id: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub axis_aligned: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    pub frames: Vec<ManifestFrame>,
    #[serde(default)]
    pub objects: Vec<ManifestObject>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub image: String,
    pub camera: ManifestCamera,
    /// `world_from_camera`; identity when omitted (single-frame scenes only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<ManifestPose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
    /// Raw depth units per meter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_scale: Option<f64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCamera {
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_point: Option<[f64; 2]>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPose {
    /// Row-major 3x3.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestBox {
    pub center: [f64; 3],
    pub size: [f64; 3],
    /// Normalized `[pitch, yaw, roll]`; zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<[f64; 3]>,
}

/// Coordinate frame a box is given in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoxFrame {
    #[default]
    World,
    Camera(usize),
}

impl Serialize for BoxFrame {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BoxFrame::World => s.serialize_str("world"),
            BoxFrame::Camera(i) => s.serialize_u64(*i as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BoxFrame {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) if s == "world" => Ok(BoxFrame::World),
            Value::Number(n) if n.as_u64().is_some() => Ok(BoxFrame::Camera(n.as_u64().unwrap() as usize)),
            other => Err(serde::de::Error::custom(format!(
                "expected \"world\" or a frame index, got {other}"
            ))),
        }
    }
}

fn is_world(f: &BoxFrame) -> bool {
    *f == BoxFrame::World
}

/// Image-space handles for referring to an object in its first frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectRefs {
    /// `[x1, y1, x2, y2]` in pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box2d: Option<[f64; 4]>,
    /// Mask center in pixels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 2]>,
    /// Id of a drawn visual-prompt marker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marker: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub id: u32,
    pub label: String,
    #[serde(rename = "box")]
    pub bbox: ManifestBox,
    #[serde(default, skip_serializing_if = "is_world")]
    pub frame: BoxFrame,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_frames: Option<Vec<bool>>,
    /// Frame index of first appearance (video scenes).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appearance: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refs: Option<ObjectRefs>,
    /// Instance point samples, in the same frame as the box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 3]>>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

pub fn load_manifest(path: &Path) -> Result<SceneManifest, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_manifest(&text).map_err(|e| e.with_path(path))
}

pub fn parse_manifest(text: &str) -> Result<SceneManifest, DatasetError> {
    let value: Value = serde_json::from_str(text).map_err(|e| DatasetError::Json {
        path: None,
        message: e.to_string(),
    })?;
    validate_manifest(&value)?;
    serde_json::from_value(value).map_err(|e| DatasetError::Json {
        path: None,
        message: e.to_string(),
    })
}

struct Ctx {
    pointer: String,
}

impl Ctx {
    fn err(&self, message: impl Into<String>) -> DatasetError {
        DatasetError::SchemaViolation {
            pointer: self.pointer.clone(),
            message: message.into(),
        }
    }

    fn child(&self, key: impl std::fmt::Display) -> Ctx {
        let key = key.to_string().replace('~', "~0").replace('/', "~1");
        Ctx {
            pointer: format!("{}/{}", self.pointer, key),
        }
    }
}

fn object<'a>(v: &'a Value, cx: &Ctx) -> Result<&'a serde_json::Map<String, Value>, DatasetError> {
    v.as_object().ok_or_else(|| cx.err("expected an object"))
}

fn required<'a>(m: &'a serde_json::Map<String, Value>, key: &str, cx: &Ctx) -> Result<&'a Value, DatasetError> {
    m.get(key).ok_or_else(|| cx.child(key).err("required field is missing"))
}

fn finite(v: &Value, cx: &Ctx) -> Result<f64, DatasetError> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| cx.err("expected a finite number"))
}

fn positive(v: &Value, cx: &Ctx) -> Result<f64, DatasetError> {
    let x = finite(v, cx)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(cx.err(format!("expected a positive number, got {x}")))
    }
}

fn index(v: &Value, cx: &Ctx) -> Result<u64, DatasetError> {
    v.as_u64().ok_or_else(|| cx.err("expected a non-negative integer"))
}

fn non_empty_str<'a>(v: &'a Value, cx: &Ctx) -> Result<&'a str, DatasetError> {
    match v.as_str() {
        Some(s) if !s.is_empty() => Ok(s),
        Some(_) => Err(cx.err("string must not be empty")),
        None => Err(cx.err("expected a string")),
    }
}

fn numbers<const N: usize>(v: &Value, cx: &Ctx) -> Result<[f64; N], DatasetError> {
    let arr = v.as_array().ok_or_else(|| cx.err(format!("expected an array of {N} numbers")))?;
    if arr.len() != N {
        return Err(cx.err(format!("expected {N} numbers, got {}", arr.len())));
    }
    let mut out = [0.0; N];
    for (i, x) in arr.iter().enumerate() {
        out[i] = finite(x, &cx.child(i))?;
    }
    Ok(out)
}

/// Checks a manifest document, returning the first violation found.
pub fn validate_manifest(v: &Value) -> Result<(), DatasetError> {
    let root = Ctx { pointer: String::new() };
    let m = object(v, &root)?;

    let version = index(required(m, "schema_version", &root)?, &root.child("schema_version"))?;
    if version != SCHEMA_VERSION {
        return Err(root
            .child("schema_version")
            .err(format!("unsupported schema version {version}, expected {SCHEMA_VERSION}")));
    }
    non_empty_str(required(m, "scene_id", &root)?, &root.child("scene_id"))?;
    non_empty_str(required(m, "source", &root)?, &root.child("source"))?;
    if let Some(b) = m.get("axis_aligned") {
        b.as_bool().ok_or_else(|| root.child("axis_aligned").err("expected a boolean"))?;
    }
    if let Some(fps) = m.get("fps") {
        positive(fps, &root.child("fps"))?;
    }

    let fcx = root.child("frames");
    let frames = required(m, "frames", &root)?
        .as_array()
        .ok_or_else(|| fcx.err("expected an array"))?;
    if frames.is_empty() {
        return Err(fcx.err("at least one frame is required"));
    }
    for (i, f) in frames.iter().enumerate() {
        validate_frame(f, &fcx.child(i), frames.len() > 1)?;
    }

    let Some(objects) = m.get("objects") else {
        return Ok(());
    };
    let ocx = root.child("objects");
    let objects = objects.as_array().ok_or_else(|| ocx.err("expected an array"))?;
    let mut ids = std::collections::BTreeSet::new();
    for (i, o) in objects.iter().enumerate() {
        let cx = ocx.child(i);
        let id = validate_object(o, &cx, frames.len())?;
        if !ids.insert(id) {
            return Err(cx.child("id").err(format!("duplicate object id {id}")));
        }
    }
    Ok(())
}

fn validate_frame(f: &Value, cx: &Ctx, pose_required: bool) -> Result<(), DatasetError> {
    let m = object(f, cx)?;
    non_empty_str(required(m, "image", cx)?, &cx.child("image"))?;

    let ccx = cx.child("camera");
    let cam = object(required(m, "camera", cx)?, &ccx)?;
    for key in ["width", "height"] {
        let v = index(required(cam, key, &ccx)?, &ccx.child(key))?;
        if v == 0 || v > u32::MAX as u64 {
            return Err(ccx.child(key).err(format!("image dimension out of range: {v}")));
        }
    }
    positive(required(cam, "focal", &ccx)?, &ccx.child("focal"))?;
    if let Some(pp) = cam.get("principal_point") {
        numbers::<2>(pp, &ccx.child("principal_point"))?;
    }

    match m.get("pose") {
        None if pose_required => return Err(cx.child("pose").err("required for multi-frame scenes")),
        None => {}
        Some(p) => {
            let pcx = cx.child("pose");
            let pm = object(p, &pcx)?;
            let rcx = pcx.child("rotation");
            let rows = required(pm, "rotation", &pcx)?
                .as_array()
                .filter(|r| r.len() == 3)
                .ok_or_else(|| rcx.err("expected a 3x3 array"))?;
            let mut r = [[0.0; 3]; 3];
            for (i, row) in rows.iter().enumerate() {
                r[i] = numbers::<3>(row, &rcx.child(i))?;
            }
            let mat = Mat3::new(
                r[0][0], r[0][1], r[0][2], r[1][0], r[1][1], r[1][2], r[2][0], r[2][1], r[2][2],
            );
            if !is_rotation(&mat, 1e-6) {
                return Err(rcx.err("not a proper rotation (orthonormal, det +1)"));
            }
            numbers::<3>(required(pm, "translation", &pcx)?, &pcx.child("translation"))?;
        }
    }
    if let Some(d) = m.get("depth") {
        non_empty_str(d, &cx.child("depth"))?;
    }
    if let Some(s) = m.get("depth_scale") {
        positive(s, &cx.child("depth_scale"))?;
    }
    Ok(())
}

fn validate_object(o: &Value, cx: &Ctx, n_frames: usize) -> Result<u64, DatasetError> {
    let m = object(o, cx)?;
    let id = index(required(m, "id", cx)?, &cx.child("id"))?;
    if id > u32::MAX as u64 {
        return Err(cx.child("id").err("id out of range"));
    }
    non_empty_str(required(m, "label", cx)?, &cx.child("label"))?;

    let bcx = cx.child("box");
    let b = object(required(m, "box", cx)?, &bcx)?;
    numbers::<3>(required(b, "center", &bcx)?, &bcx.child("center"))?;
    let size = numbers::<3>(required(b, "size", &bcx)?, &bcx.child("size"))?;
    if let Some(k) = size.iter().position(|s| *s <= 0.0) {
        return Err(bcx.child("size").child(k).err("size must be positive"));
    }
    if let Some(a) = b.get("angles") {
        let acx = bcx.child("angles");
        let angles = numbers::<3>(a, &acx)?;
        if let Some(k) = angles.iter().position(|x| x.abs() > 1.0) {
            return Err(acx.child(k).err("normalized angle must lie in [-1, 1]"));
        }
    }

    let in_range = |v: &Value, cx: &Ctx| -> Result<(), DatasetError> {
        let i = index(v, cx)?;
        if i as usize >= n_frames {
            return Err(cx.err(format!("frame index {i} out of range for {n_frames} frames")));
        }
        Ok(())
    };
    if let Some(f) = m.get("frame") {
        let fcx = cx.child("frame");
        if f.as_str() != Some("world") {
            in_range(f, &fcx).map_err(|_| fcx.err("expected \"world\" or a valid frame index"))?;
        }
    }
    if let Some(flags) = m.get("in_frames") {
        let icx = cx.child("in_frames");
        let arr = flags.as_array().ok_or_else(|| icx.err("expected an array of booleans"))?;
        if arr.len() != n_frames {
            return Err(icx.err(format!("expected {n_frames} flags, got {}", arr.len())));
        }
        for (i, x) in arr.iter().enumerate() {
            x.as_bool().ok_or_else(|| icx.child(i).err("expected a boolean"))?;
        }
    }
    if let Some(a) = m.get("appearance") {
        in_range(a, &cx.child("appearance"))?;
    }
    if let Some(r) = m.get("refs") {
        let rcx = cx.child("refs");
        let rm = object(r, &rcx)?;
        if let Some(b) = rm.get("box2d") {
            numbers::<4>(b, &rcx.child("box2d"))?;
        }
        if let Some(p) = rm.get("point") {
            numbers::<2>(p, &rcx.child("point"))?;
        }
        if let Some(k) = rm.get("marker") {
            index(k, &rcx.child("marker"))?;
        }
    }
    if let Some(p) = m.get("points") {
        let pcx = cx.child("points");
        let arr = p.as_array().ok_or_else(|| pcx.err("expected an array of points"))?;
        for (i, x) in arr.iter().enumerate() {
            numbers::<3>(x, &pcx.child(i))?;
        }
    }
    Ok(id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({
            "schema_version": 1,
            "scene_id": "s0",
            "source": "synthetic",
            "frames": [{"image": "rgb.png", "camera": {"width": 640, "height": 480, "focal": 500.0}}],
            "objects": [{"id": 0, "label": "chair", "box": {"center": [0, 0, 2], "size": [1, 1, 1]}}]
        })
    }

    fn pointer(v: &Value) -> String {
        match validate_manifest(v) {
            Err(DatasetError::SchemaViolation { pointer, .. }) => pointer,
            other => panic!("expected a violation, got {other:?}"),
        }
    }

    #[test]
    fn minimal_loads() {
        let m = parse_manifest(&minimal().to_string()).unwrap();
        assert_eq!(m.frames.len(), 1);
        assert_eq!(m.objects[0].frame, BoxFrame::World);
    }

    #[test]
    fn missing_camera_pointer() {
        let mut v = minimal();
        v["frames"][0].as_object_mut().unwrap().remove("camera");
        assert_eq!(pointer(&v), "/frames/0/camera");
    }

    #[test]
    fn nested_pointers() {
        let mut v = minimal();
        v["objects"][0]["box"]["size"][1] = json!(0);
        assert_eq!(pointer(&v), "/objects/0/box/size/1");

        let mut v = minimal();
        v["frames"][0]["camera"]["focal"] = json!(-2);
        assert_eq!(pointer(&v), "/frames/0/camera/focal");

        let mut v = minimal();
        v["objects"][0]["in_frames"] = json!([true, false]);
        assert_eq!(pointer(&v), "/objects/0/in_frames");

        let mut v = minimal();
        v["frames"] = json!([v["frames"][0].clone(), v["frames"][0].clone()]);
        assert_eq!(pointer(&v), "/frames/0/pose");
    }

    #[test]
    fn bad_rotation_rejected() {
        let mut v = minimal();
        v["frames"][0]["pose"] = json!({"rotation": [[1, 0, 0], [0, 1, 0], [0, 0, -1]], "translation": [0, 0, 0]});
        assert_eq!(pointer(&v), "/frames/0/pose/rotation");
    }

    #[test]
    fn angle_range_checked() {
        let mut v = minimal();
        v["objects"][0]["box"]["angles"] = json!([0, 1.5, 0]);
        assert_eq!(pointer(&v), "/objects/0/box/angles/1");
        let mut v = minimal();
        v["axis_aligned"] = json!("yes");
        assert_eq!(pointer(&v), "/axis_aligned");
    }

    #[test]
    fn unknown_fields_preserved() {
        let mut v = minimal();
        v["vendor"] = json!({"k": 1});
        v["objects"][0]["score"] = json!(0.9);
        let m = parse_manifest(&v.to_string()).unwrap();
        let back = serde_json::to_value(&m).unwrap();
        assert_eq!(back["vendor"], json!({"k": 1}));
        assert_eq!(back["objects"][0]["score"], json!(0.9));
    }

    #[test]
    fn field_order_does_not_matter() {
        let text = r#"{"objects":[{"box":{"size":[1,1,1],"center":[0,0,2]},"label":"chair","id":0}],
            "frames":[{"camera":{"focal":500.0,"height":480,"width":640},"image":"rgb.png"}],
            "source":"synthetic","scene_id":"s0","schema_version":1}"#;
        assert_eq!(parse_manifest(text).unwrap(), parse_manifest(&minimal().to_string()).unwrap());
    }

    #[test]
    fn schema_document_is_json() {
        let schema: Value = serde_json::from_str(MANIFEST_SCHEMA).unwrap();
        let required: Vec<&str> = schema["required"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
        assert_eq!(required, ["schema_version", "scene_id", "source", "frames"]);
    }
}
