//! 3D detection and 3D grounding samples.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use crate::dataset::{SceneObject, ScenePack};
use crate::geometry::{Box3D, CameraModel};
use crate::metrics::iou3d;

use super::text::{pick, DETECT, GROUND};
use super::{fill, fmt2, media_for, meta, sample_id, GenError, InstructionSample, Message, Task};

const PREAMBLE: &str = include_str!("../../templates/detection_preamble.txt");
const SINGLE_WORLD: &str = "We take the camera coordinate system as the world coordinate system.";
const MULTI_WORLD: &str = "We take the camera coordinate system of the first image as the world coordinate system.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnMode {
    /// One question about one label.
    Single,
    /// One question per label, sharing the media and the preamble.
    Multi,
}

/// Camera-parameter preamble placed before detection and grounding questions.
pub fn detection_preamble(cam: &CameraModel, multi_image: bool) -> String {
    let text = fill(
        PREAMBLE.trim_end(),
        &[
            ("hfov", &fmt2(cam.hfov_degrees())),
            ("vfov", &fmt2(cam.vfov_degrees())),
            ("width", &cam.width.to_string()),
            ("height", &cam.height.to_string()),
        ],
    )
    .expect("preamble slots are all supplied");
    if multi_image {
        text.replace(SINGLE_WORLD, MULTI_WORLD)
    } else {
        text
    }
}

/// `[x,y,z,xl,yl,zl,p,y,r]` with two decimals and no spaces.
pub(crate) fn bbox_numbers(b: &Box3D) -> String {
    let nums: Vec<String> = b.values().iter().map(|v| fmt2(*v)).collect();
    format!("[{}]", nums.join(","))
}

/// Detection answer: one `{"bbox_3d":[…],"label":…}` entry per tab-indented line.
pub fn detection_json(boxes: &[Box3D]) -> String {
    if boxes.is_empty() {
        return "[]".into();
    }
    let lines: Vec<String> = boxes
        .iter()
        .map(|b| {
            format!(
                "\t{{\"bbox_3d\":{},\"label\":{}}}",
                bbox_numbers(b),
                serde_json::to_string(&b.label).expect("strings serialize")
            )
        })
        .collect();
    format!("[\n{}\n]", lines.join(",\n"))
}

#[derive(Deserialize)]
struct DetEntry {
    bbox_3d: Vec<f64>,
    label: String,
}

/// Parses the first JSON list found in `text` into boxes.
pub fn parse_detection_json(text: &str) -> Result<Vec<Box3D>, String> {
    let start = text.find('[').ok_or("no JSON list found")?;
    let end = text.rfind(']').ok_or("no JSON list found")?;
    if end < start {
        return Err("no JSON list found".into());
    }
    let entries: Vec<DetEntry> = serde_json::from_str(&text[start..=end]).map_err(|e| e.to_string())?;
    entries
        .into_iter()
        .map(|e| Box3D::from_bbox_3d(&e.bbox_3d, e.label).map_err(|e| e.to_string()))
        .collect()
}

fn candidates(pack: &ScenePack) -> Vec<&SceneObject> {
    let multi = pack.frames.len() > 1;
    pack.objects.iter().filter(|o| multi || o.present_in(0)).collect()
}

fn task_and_frames(pack: &ScenePack, single: Task, multi: Task) -> (Task, Vec<usize>) {
    if pack.frames.len() > 1 {
        (multi, (0..pack.frames.len()).collect())
    } else {
        (single, vec![0])
    }
}

/// Detection sample over one or several labels. Multi-frame packs yield
/// multi-image samples whose boxes live in frame-1 coordinates.
pub fn gen_3ddet_sample(
    pack: &ScenePack,
    labels: Option<&[String]>,
    mode: TurnMode,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    if !pack.fov_unified() {
        return Err(GenError::NotFovUnified);
    }
    let objects = candidates(pack);
    let available: BTreeSet<&str> = objects
        .iter()
        .map(|o| o.label.as_str())
        .filter(|l| labels.is_none_or(|f| f.iter().any(|x| x == l)))
        .collect();
    if available.is_empty() {
        return Err(GenError::NoMatchingObjects("no object carries a requested label".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<&str> = available.into_iter().collect();
    order.shuffle(&mut rng);
    if mode == TurnMode::Single {
        order.truncate(1);
    }

    let (task, frames) = task_and_frames(pack, Task::Detection3d, Task::Detection3dMulti);
    let preamble = detection_preamble(&pack.frames[0].camera, frames.len() > 1);
    let mut messages = Vec::new();
    let mut templates = Vec::new();
    let mut ids = Vec::new();
    let mut answer = String::new();
    for (turn, label) in order.iter().enumerate() {
        let (tid, phr) = pick(&mut rng, &DETECT);
        let q = fill(phr, &[("label", label)])?;
        let content = if turn == 0 { format!("{preamble}\n\n{q}") } else { q };
        let boxes: Vec<&SceneObject> = objects.iter().copied().filter(|o| o.label == *label).collect();
        ids.extend(boxes.iter().map(|o| o.id));
        answer = detection_json(&boxes.iter().map(|o| o.bbox.clone()).collect::<Vec<_>>());
        messages.push(Message::user(content));
        messages.push(Message::assistant(answer.clone()));
        templates.push(tid);
    }
    let mut m = meta(pack, templates.join(","), seed, ids);
    m.params.insert("labels".into(), json!(order));
    m.params.insert("turn_mode".into(), json!(mode));
    Ok(InstructionSample {
        id: sample_id(&pack.scene_id, task, seed),
        task,
        media: media_for(pack, &frames),
        messages,
        answer,
        meta: m,
    })
}

/// Grounding sample: the question carries a box, the answer is the label of
/// the scene object overlapping it most.
pub fn gen_grounding(pack: &ScenePack, bx: &Box3D, seed: u64) -> Result<InstructionSample, GenError> {
    if !pack.fov_unified() {
        return Err(GenError::NotFovUnified);
    }
    let mut best: Option<(&SceneObject, f64)> = None;
    for o in candidates(pack) {
        let iou = iou3d(bx, &o.bbox).map_err(|e| GenError::NoMatchingObjects(e.to_string()))?;
        if iou > 0.0 && best.is_none_or(|(_, b)| iou > b) {
            best = Some((o, iou));
        }
    }
    let (obj, iou) = best.ok_or_else(|| GenError::NoMatchingObjects("box overlaps no object".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (task, frames) = task_and_frames(pack, Task::Grounding3d, Task::Grounding3d);
    let (tid, phr) = pick(&mut rng, &GROUND);
    let q = fill(phr, &[("box", &bbox_numbers(bx))])?;
    let preamble = detection_preamble(&pack.frames[0].camera, frames.len() > 1);
    let mut m = meta(pack, tid, seed, vec![obj.id]);
    m.params.insert("box".into(), json!(bx.values()));
    m.params.insert("iou".into(), json!(iou));
    Ok(InstructionSample {
        id: sample_id(&pack.scene_id, task, seed),
        task,
        media: media_for(pack, &frames),
        messages: vec![Message::user(format!("{preamble}\n\n{q}")), Message::assistant(obj.label.clone())],
        answer: obj.label.clone(),
        meta: m,
    })
}
