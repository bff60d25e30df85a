//! Instruction samples generated from normalized scene packs.
//!
//! Every generator is a pure function of `(pack, parameters, seed)`. Answers
//! are computed from the frame-1 geometry and the parameters needed to
//! recompute them are recorded in the sample's `meta`.

mod bev;
mod detection;
mod multi;
mod plan;
mod relation;
mod single;
mod teacher;
mod text;
mod video;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{SceneObject, ScenePack};
use crate::geometry::GeometryError;

pub use bev::{footprint_corners, render_bev, BevRaster, BevStyle, Footprint};
pub use detection::{
    detection_json, detection_preamble, gen_3ddet_sample, gen_grounding, parse_detection_json, TurnMode,
};
pub use multi::{
    gen_camcam_relation, gen_camera_motion_rotation, gen_camera_motion_translation, gen_correspondence_mcq,
    gen_objobj_relation, CamCamVariant, ObjRelVariant,
};
pub use plan::{derive_seed, generate_scene, GenReport, SceneInputs, MAX_ATTEMPTS};
pub use relation::{
    classify_camera_motion, compass_relation, egocentric_relation, ground_bearing, CameraMotion, Compass,
    Egocentric, MotionThresholds, RotationLabel, TranslationLabel,
};
pub use single::{
    gen_depth_order, gen_depth_point_compare, gen_distance_compare, gen_measurement, gen_scene_caption,
    DepthFormat, MeasureKind, MeasureUnit,
};
pub use teacher::{
    apply_cot, build_teacher_prompt, object_info, parse_caption, parse_cot_triplet, prompt_hash, CotTriplet, QaPair,
    ReplayTeacher, TeacherClient, TeacherKind, TeacherPrompt,
};
pub use text::{fill, has_placeholder, placeholders};
pub use video::{gen_video_count, gen_video_direction, gen_video_distance, gen_video_order};

/// Task families emitted by the generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    DepthOrder,
    DepthPointCompare,
    DistanceCompare,
    Detection3d,
    Grounding3d,
    Measurement,
    SceneCaptionSingle,
    Correspondence,
    Detection3dMulti,
    ObjectObjectRelation,
    CameraObjectRelation,
    CameraCameraRelation,
    CameraMotionTranslation,
    CameraMotionRotation,
    SceneCaptionMulti,
    VideoAppearanceOrder,
    VideoCount,
    VideoObjectDistance,
    VideoObjectDirection,
}

impl Task {
    pub const ALL: [Task; 19] = [
        Task::DepthOrder,
        Task::DepthPointCompare,
        Task::DistanceCompare,
        Task::Detection3d,
        Task::Grounding3d,
        Task::Measurement,
        Task::SceneCaptionSingle,
        Task::Correspondence,
        Task::Detection3dMulti,
        Task::ObjectObjectRelation,
        Task::CameraObjectRelation,
        Task::CameraCameraRelation,
        Task::CameraMotionTranslation,
        Task::CameraMotionRotation,
        Task::SceneCaptionMulti,
        Task::VideoAppearanceOrder,
        Task::VideoCount,
        Task::VideoObjectDistance,
        Task::VideoObjectDirection,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Task::DepthOrder => "depth_order",
            Task::DepthPointCompare => "depth_point_compare",
            Task::DistanceCompare => "distance_compare",
            Task::Detection3d => "detection3d",
            Task::Grounding3d => "grounding3d",
            Task::Measurement => "measurement",
            Task::SceneCaptionSingle => "scene_caption_single",
            Task::Correspondence => "correspondence",
            Task::Detection3dMulti => "detection3d_multi",
            Task::ObjectObjectRelation => "object_object_relation",
            Task::CameraObjectRelation => "camera_object_relation",
            Task::CameraCameraRelation => "camera_camera_relation",
            Task::CameraMotionTranslation => "camera_motion_translation",
            Task::CameraMotionRotation => "camera_motion_rotation",
            Task::SceneCaptionMulti => "scene_caption_multi",
            Task::VideoAppearanceOrder => "video_appearance_order",
            Task::VideoCount => "video_count",
            Task::VideoObjectDistance => "video_object_distance",
            Task::VideoObjectDirection => "video_object_direction",
        }
    }

    /// Coarse family used by the distribution report.
    pub fn family(self) -> &'static str {
        match self {
            Task::DepthOrder
            | Task::DepthPointCompare
            | Task::DistanceCompare
            | Task::Detection3d
            | Task::Grounding3d
            | Task::Measurement
            | Task::SceneCaptionSingle => "single_image",
            Task::Correspondence
            | Task::Detection3dMulti
            | Task::ObjectObjectRelation
            | Task::CameraObjectRelation
            | Task::CameraCameraRelation
            | Task::CameraMotionTranslation
            | Task::CameraMotionRotation
            | Task::SceneCaptionMulti => "multi_image",
            Task::VideoAppearanceOrder
            | Task::VideoCount
            | Task::VideoObjectDistance
            | Task::VideoObjectDirection => "video",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .iter()
            .copied()
            .find(|t| t.tag() == s)
            .ok_or_else(|| format!("unknown task '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// Where a sample came from and what its answer was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub template: String,
    pub seed: u64,
    pub scene: String,
    /// Object ids in the order the question mentions them.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objects: Vec<u32>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// One chat-format training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionSample {
    pub id: String,
    pub task: Task,
    pub media: Vec<String>,
    pub messages: Vec<Message>,
    /// Canonical answer of the last assistant turn.
    pub answer: String,
    pub meta: SampleMeta,
}

impl InstructionSample {
    pub fn user_turns(&self) -> impl Iterator<Item = &str> {
        self.turns(Role::User)
    }

    pub fn assistant_turns(&self) -> impl Iterator<Item = &str> {
        self.turns(Role::Assistant)
    }

    fn turns(&self, role: Role) -> impl Iterator<Item = &str> {
        self.messages
            .iter()
            .filter(move |m| m.role == role)
            .map(|m| m.content.as_str())
    }

    /// Reasoning text of the last assistant turn, if it carries one.
    pub fn think(&self) -> Option<&str> {
        let last = self.assistant_turns().last()?;
        let rest = last.strip_prefix("<think>")?;
        rest.find("</think>").map(|end| &rest[..end])
    }

    /// Attaches reasoning to the last assistant turn, keeping the answer.
    pub fn with_think(mut self, thought: &str) -> Self {
        if let Some(m) = self.messages.iter_mut().rev().find(|m| m.role == Role::Assistant) {
            m.content = assistant_content(Some(thought), &self.answer);
        }
        self
    }
}

/// Assistant text with an optional reasoning block: `<think>…</think> answer`.
pub fn assistant_content(think: Option<&str>, answer: &str) -> String {
    match think {
        Some(t) => format!("<think>{t}</think> {answer}"),
        None => answer.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("depth gap {gap:.3} m is below the minimum {min} m")]
    InsufficientSeparation { gap: f64, min: f64 },
    #[error("distance gap {gap:.3} m is below the tie tolerance {tol} m")]
    DistanceTie { gap: f64, tol: f64 },
    #[error("no matching objects: {0}")]
    NoMatchingObjects(String),
    #[error("need at least {need} objects, have {have}")]
    NotEnoughObjects { need: usize, have: usize },
    #[error("object {id} has no {kind} reference")]
    MissingReference { id: u32, kind: &'static str },
    #[error("unknown object id {0}")]
    UnknownObject(u32),
    #[error("reference direction has no ground-plane extent")]
    DegenerateReference,
    #[error("target lies on the reference point in the ground plane")]
    DegenerateTarget,
    #[error("direction falls on a sector boundary")]
    BoundaryDirection,
    #[error("no valid anchor objects")]
    NoValidAnchors,
    #[error("no significant camera motion")]
    NoSignificantMotion,
    #[error("scene needs at least {need} frames, has {have}")]
    NotEnoughFrames { need: usize, have: usize },
    #[error("frame {0} is out of range")]
    FrameOutOfRange(usize),
    #[error("scene is not FoV-unified")]
    NotFovUnified,
    #[error("objects share the same first appearance")]
    AppearanceTie,
    #[error("frame {0} has no depth map")]
    NoDepth(usize),
    #[error("not enough distinct candidates")]
    NotEnoughCandidates,
    #[error("label '{0}' names more than one object in the scene")]
    AmbiguousLabel(String),
    #[error("first frame pose is not the identity; boxes are not in frame-1 coordinates")]
    NotFrameOne,
    #[error("missing value for placeholder '{0}'")]
    MissingPlaceholder(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("teacher: {0}")]
    Teacher(String),
}

impl GenError {
    /// Errors that only mean the drawn parameters were unsuitable.
    pub fn is_rejection(&self) -> bool {
        !matches!(self, GenError::MissingPlaceholder(_) | GenError::Geometry(_) | GenError::Teacher(_) | GenError::NotFrameOne)
    }
}

/// Thresholds shared by the generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Minimum depth gap between neighbors in ordering questions, meters.
    pub min_depth_gap: f64,
    /// Minimum gap between the best and second-best distance, meters.
    pub distance_tie_tol: f64,
    /// Maximum center-height difference among anchor objects, meters.
    pub anchor_max_height_gap: f64,
    pub motion: MotionThresholds,
    pub rel_tol: f64,
    pub points_per_instance: usize,
    /// Minimum pixel distance between correspondence options.
    pub min_option_separation_px: f64,
    pub max_depth_order_objects: usize,
    pub num_options: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            min_depth_gap: 0.15,
            distance_tie_tol: 0.10,
            anchor_max_height_gap: 1.0,
            motion: MotionThresholds::default(),
            rel_tol: crate::visibility::DEFAULT_REL_TOL,
            points_per_instance: crate::visibility::DEFAULT_POINTS_PER_INSTANCE,
            min_option_separation_px: 20.0,
            max_depth_order_objects: 4,
            num_options: 4,
        }
    }
}

pub(crate) fn sample_id(scene: &str, task: Task, seed: u64) -> String {
    format!("{scene}:{}:{seed:016x}", task.tag())
}

pub(crate) fn media_for(pack: &ScenePack, frames: &[usize]) -> Vec<String> {
    frames.iter().map(|&i| pack.frames[i].image.clone()).collect()
}

pub(crate) fn meta(pack: &ScenePack, template: String, seed: u64, objects: Vec<u32>) -> SampleMeta {
    SampleMeta {
        template,
        seed,
        scene: pack.scene_id.clone(),
        objects,
        params: BTreeMap::new(),
        config_hash: None,
    }
}

pub(crate) fn find_objects<'a>(pack: &'a ScenePack, ids: &[u32]) -> Result<Vec<&'a SceneObject>, GenError> {
    ids.iter()
        .map(|&id| pack.object(id).ok_or(GenError::UnknownObject(id)))
        .collect()
}

pub(crate) fn letter(i: usize) -> char {
    (b'A' + i as u8) as char
}

/// Display names for a list of objects: the bare label when unique in the
/// list, otherwise `label-A`, `label-B`, … in list order.
pub(crate) fn display_names(objects: &[&SceneObject]) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    objects
        .iter()
        .map(|o| {
            let total = objects.iter().filter(|p| p.label == o.label).count();
            if total == 1 {
                o.label.clone()
            } else {
                let k = seen.entry(o.label.as_str()).or_insert(0);
                *k += 1;
                format!("{}-{}", o.label, letter(*k - 1))
            }
        })
        .collect()
}

/// Builds a multiple-choice option list containing `correct` and up to
/// `n - 1` distinct distractors; returns the options and the correct index.
pub(crate) fn choose_options(
    rng: &mut ChaCha8Rng,
    correct: &str,
    distractors: &[String],
    n: usize,
) -> (Vec<String>, usize) {
    let pool: Vec<&String> = {
        let mut seen = Vec::new();
        for d in distractors {
            if d != correct && !seen.contains(&d) {
                seen.push(d);
            }
        }
        seen
    };
    let take = n.saturating_sub(1).min(pool.len());
    let mut options: Vec<String> = index::sample(rng, pool.len(), take)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect();
    let pos = rng.random_range(0..=options.len());
    options.insert(pos, correct.to_string());
    (options, pos)
}

/// `A. x, B. y, C. z`
pub(crate) fn inline_options(options: &[String]) -> String {
    options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("{}. {o}", letter(i)))
        .collect::<Vec<_>>()
        .join(", ")
}

/// One option per line.
pub(crate) fn listed_options(options: &[String]) -> String {
    options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("{}. {o}", letter(i)))
        .collect::<Vec<_>>()
        .join("\n")
}

pub(crate) fn option_answer(options: &[String], pos: usize) -> String {
    format!("{}. {}", letter(pos), options[pos])
}

/// Stable 64-bit digest of a string, used for id and seed derivation.
pub(crate) fn digest64(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest is 32 bytes"))
}

/// Formats a metric value with two decimals and no negative zero.
pub(crate) fn fmt2(x: f64) -> String {
    format!("{:.2}", crate::geometry::round2(x))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use std::collections::BTreeMap;

    use crate::dataset::{Frame, ObjectRefs, SceneObject, ScenePack};
    use crate::geometry::{Box3D, CameraModel, EulerAngles, Pose, Vec3};

    pub fn object(id: u32, label: &str, center: [f64; 3], size: [f64; 3], frames: usize) -> SceneObject {
        SceneObject {
            id,
            label: label.into(),
            bbox: Box3D::new(Vec3::from(center), Vec3::from(size), EulerAngles::ZERO, label).unwrap(),
            in_frames: vec![true; frames],
            appearance: None,
            refs: ObjectRefs::default(),
            points: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn frame(name: &str, pose: Pose) -> Frame {
        Frame {
            image: name.into(),
            camera: CameraModel::new(640, 480, 500.0).unwrap(),
            original_camera: None,
            pose,
            depth: None,
            depth_scale: 1000.0,
            extra: BTreeMap::new(),
        }
    }

    pub fn pack(frames: Vec<Frame>, objects: Vec<SceneObject>) -> ScenePack {
        ScenePack {
            scene_id: "fixture".into(),
            source: "synthetic".into(),
            axis_aligned: false,
            fps: None,
            f_new: Some(500.0),
            root: None,
            frames,
            objects,
            extra: BTreeMap::new(),
        }
    }

    pub fn single(objects: Vec<SceneObject>) -> ScenePack {
        pack(vec![frame("img0.jpg", Pose::identity())], objects)
    }
}
