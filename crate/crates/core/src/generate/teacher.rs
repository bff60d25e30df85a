//! Prompt assembly for the external teacher model that writes scene
//! captions and chain-of-thought rationales, plus parsing of its replies.
//!
//! The model itself sits behind [`TeacherClient`]; [`ReplayTeacher`] serves
//! recorded replies keyed by prompt hash.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{SceneObject, ScenePack};
use crate::geometry::matrix_to_euler_canonical;

use super::bev::{render_bev, BevRaster, BevStyle};
use super::{display_names, fill, fmt2, GenError, InstructionSample, Message, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherKind {
    SceneCaption,
    CotObjRel,
    CotCamRotation,
    CotCamTranslation,
}

impl TeacherKind {
    pub fn template(self) -> &'static str {
        match self {
            TeacherKind::SceneCaption => include_str!("../../templates/scene_caption.txt"),
            TeacherKind::CotObjRel => include_str!("../../templates/cot_objrel.txt"),
            TeacherKind::CotCamRotation => include_str!("../../templates/cot_cam_rotation.txt"),
            TeacherKind::CotCamTranslation => include_str!("../../templates/cot_cam_translation.txt"),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            TeacherKind::SceneCaption => "scene_caption",
            TeacherKind::CotObjRel => "cot_objrel",
            TeacherKind::CotCamRotation => "cot_cam_rotation",
            TeacherKind::CotCamTranslation => "cot_cam_translation",
        }
    }
}

/// A question-answer pair handed to the teacher for rewriting. `process` is
/// the optional worked computation some templates show as a hint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub process: Option<String>,
}

impl QaPair {
    pub fn from_sample(s: &InstructionSample) -> Self {
        Self {
            question: s.user_turns().next().unwrap_or_default().to_string(),
            answer: s.answer.clone(),
            process: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TeacherPrompt {
    pub kind: TeacherKind,
    pub text: String,
    /// Images in the order the prompt refers to them.
    pub images: Vec<String>,
    /// PNG bytes of the top-view raster, for prompts that use one.
    pub bev: Option<Vec<u8>>,
}

/// Stable hex digest of a prompt, used as the replay key.
pub fn prompt_hash(p: &TeacherPrompt) -> String {
    let mut h = Sha256::new();
    for part in [p.kind.tag().as_bytes(), p.text.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    for img in &p.images {
        h.update((img.len() as u64).to_le_bytes());
        h.update(img.as_bytes());
    }
    if let Some(b) = &p.bev {
        h.update((b.len() as u64).to_le_bytes());
        h.update(b);
    }
    hex::encode(h.finalize())
}

pub trait TeacherClient: Send + Sync {
    fn complete(&self, prompt: &TeacherPrompt) -> Result<String, GenError>;
}

/// Serves previously recorded teacher replies.
#[derive(Debug, Clone, Default)]
pub struct ReplayTeacher {
    replies: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct ReplayLine {
    prompt_hash: String,
    response: String,
}

impl ReplayTeacher {
    pub fn insert(&mut self, prompt: &TeacherPrompt, response: impl Into<String>) {
        self.replies.insert(prompt_hash(prompt), response.into());
    }

    /// Reads `{"prompt_hash": …, "response": …}` lines; blank lines are skipped.
    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, GenError> {
        let mut replies = BTreeMap::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| GenError::Teacher(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: ReplayLine =
                serde_json::from_str(&line).map_err(|e| GenError::Teacher(format!("line {}: {e}", n + 1)))?;
            replies.insert(r.prompt_hash, r.response);
        }
        Ok(Self { replies })
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl TeacherClient for ReplayTeacher {
    fn complete(&self, prompt: &TeacherPrompt) -> Result<String, GenError> {
        let key = prompt_hash(prompt);
        self.replies
            .get(&key)
            .cloned()
            .ok_or_else(|| GenError::Teacher(format!("no recorded reply for prompt {key}")))
    }
}

fn vec3(v: &crate::geometry::Vec3) -> String {
    format!("({}, {}, {})", fmt2(v.x), fmt2(v.y), fmt2(v.z))
}

fn size3(o: &SceneObject) -> String {
    let s = o.bbox.size();
    format!("[{}, {}, {}]", fmt2(s.x), fmt2(s.y), fmt2(s.z))
}

/// Pairwise relations between two objects seen from the camera at the
/// origin, one per axis whose center offset clears its threshold.
fn binary_relations(a: &SceneObject, b: &SceneObject) -> Vec<&'static str> {
    let d = b.bbox.center - a.bbox.center;
    let mut out = Vec::new();
    if d.x.abs() > 0.5 {
        out.push(if d.x > 0.0 { "left of" } else { "right of" });
    }
    if d.y.abs() > 0.3 {
        out.push(if d.y > 0.0 { "above" } else { "below" });
    }
    if d.z.abs() > 1.0 {
        out.push(if d.z > 0.0 { "in front of" } else { "behind" });
    }
    out
}

/// Object block of the caption prompt: one line per object, then the binary
/// relations and pairwise center distances.
pub fn object_info(objects: &[&SceneObject]) -> String {
    let names: Vec<String> = display_names(objects)
        .into_iter()
        .zip(objects)
        .enumerate()
        .map(|(i, (n, o))| format!("{n} (point-{})", o.refs.marker.unwrap_or(i as u32 + 1)))
        .collect();
    let mut out = String::new();
    for (n, o) in names.iter().zip(objects) {
        let _ = writeln!(
            out,
            "- name: \"{n}\", size: {}, centroid: {}, distance_to_camera: {}",
            size3(o),
            vec3(&o.bbox.center),
            fmt2(o.bbox.center.norm())
        );
    }
    let mut relations = Vec::new();
    let mut distances = Vec::new();
    for i in 0..objects.len() {
        for j in i + 1..objects.len() {
            for r in binary_relations(objects[i], objects[j]) {
                relations.push(format!("[{}, {}, {r}]", names[i], names[j]));
            }
            let d = (objects[j].bbox.center - objects[i].bbox.center).norm();
            distances.push(format!("[{}, {}, \"distance = {} m\"]", names[i], names[j], fmt2(d)));
        }
    }
    if !relations.is_empty() {
        let _ = writeln!(out, "Binary relationships:\n{}", relations.join("\n"));
    }
    if !distances.is_empty() {
        let _ = writeln!(out, "Distances:\n{}", distances.join("\n"));
    }
    out.trim_end().to_string()
}

fn object_records(pack: &ScenePack) -> String {
    let py_bool = |b: &bool| if *b { "True" } else { "False" };
    pack.objects
        .iter()
        .map(|o| {
            let (c, s) = (&o.bbox.center, o.bbox.size());
            let flags: Vec<&str> = o.in_frames.iter().map(py_bool).collect();
            format!(
                "{{'label': '{}', 'x_center': {}, 'y_center': {}, 'z_center': {}, 'x_size': {}, 'y_size': {}, 'z_size': {}, 'in_frames': [{}]}}",
                o.label,
                fmt2(c.x),
                fmt2(c.y),
                fmt2(c.z),
                fmt2(s.x),
                fmt2(s.y),
                fmt2(s.z),
                flags.join(", ")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn camera_records(pack: &ScenePack) -> String {
    pack.frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let [p, y, r] = matrix_to_euler_canonical(f.pose.rotation()).to_degrees();
            format!(
                "frame{}: position {}, rotation (pitch {}, yaw {}, roll {}) degrees",
                i + 1,
                vec3(f.pose.translation()),
                fmt2(p),
                fmt2(y),
                fmt2(r)
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn required<'a>(name: &str, value: Option<&'a str>) -> Result<&'a str, GenError> {
    match value {
        Some(v) if !v.trim().is_empty() => Ok(v),
        _ => Err(GenError::MissingPlaceholder(name.to_string())),
    }
}

/// Fills a teacher template from a scene. Caption prompts describe the
/// objects of the first frame; chain-of-thought prompts need a QA pair and
/// few-shot examples. The object-relation prompt carries a top-view raster,
/// rendered with the default style when `bev` is not given.
pub fn build_teacher_prompt(
    kind: TeacherKind,
    pack: &ScenePack,
    qa: Option<&QaPair>,
    few_shot: Option<&str>,
    bev: Option<&BevRaster>,
) -> Result<TeacherPrompt, GenError> {
    let template = kind.template().trim_end();
    let (text, images, bev) = match kind {
        TeacherKind::SceneCaption => {
            let objs: Vec<&SceneObject> = pack.objects.iter().filter(|o| o.present_in(0)).collect();
            let info = object_info(&objs);
            let text = fill(template, &[("object_info", &info)])?;
            (text, vec![pack.frames[0].image.clone()], None)
        }
        TeacherKind::CotObjRel => {
            let qa = qa.ok_or_else(|| GenError::MissingPlaceholder("question".into()))?;
            let question = format!("{}\nAnswer: {}", qa.question, qa.answer);
            let objects = object_records(pack);
            let text = fill(
                template,
                &[
                    ("few_shot_examples", required("few_shot_examples", few_shot)?),
                    ("camera_info", &camera_records(pack)),
                    ("object_info", &objects),
                    ("question", &question),
                    ("text_orientation_process", required("text_orientation_process", qa.process.as_deref())?),
                ],
            )?;
            let raster = match bev {
                Some(r) => r.clone(),
                None => {
                    let poses: Vec<_> = pack.frames.iter().map(|f| f.pose.clone()).collect();
                    render_bev(&pack.objects, &poses, &BevStyle::default())
                }
            };
            let png = raster.to_png().map_err(|e| GenError::Teacher(e.to_string()))?;
            (text, pack.frames.iter().map(|f| f.image.clone()).collect(), Some(png))
        }
        TeacherKind::CotCamRotation | TeacherKind::CotCamTranslation => {
            let qa = qa.ok_or_else(|| GenError::MissingPlaceholder("input".into()))?;
            let input = format!(
                "Ground-truth camera poses are:\n{}\nQuestion: {}\nAnswer: {}",
                camera_records(pack),
                qa.question,
                qa.answer
            );
            let text = fill(
                template,
                &[("few_shot_examples", required("few_shot_examples", few_shot)?), ("input", &input)],
            )?;
            (text, pack.frames.iter().map(|f| f.image.clone()).collect(), None)
        }
    };
    Ok(TeacherPrompt { kind, text, images, bev })
}

/// Text between the first `<caption>` and the following `</caption>`.
pub fn parse_caption(reply: &str) -> Result<String, GenError> {
    let start = reply
        .find("<caption>")
        .ok_or_else(|| GenError::Teacher("reply has no <caption> tag".into()))?
        + "<caption>".len();
    let len = reply[start..]
        .find("</caption>")
        .ok_or_else(|| GenError::Teacher("reply has no </caption> tag".into()))?;
    let text = reply[start..start + len].trim();
    if text.is_empty() {
        return Err(GenError::Teacher("empty caption".into()));
    }
    Ok(text.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotTriplet {
    pub question: String,
    pub thought: String,
    pub answer: String,
}

/// Rewrites single-quoted string literals as JSON strings so replies in the
/// templates' dict style parse as JSON.
fn single_to_double_quotes(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    let mut in_double = false;
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                in_double = !in_double;
                out.push(c);
            }
            '\\' if in_double => {
                out.push(c);
                if let Some(n) = chars.next() {
                    out.push(n);
                }
            }
            '\'' if !in_double => {
                out.push('"');
                while let Some(n) = chars.next() {
                    match n {
                        '\'' => break,
                        '\\' => match chars.next() {
                            Some('\'') => out.push('\''),
                            Some(e) => {
                                out.push('\\');
                                out.push(e);
                            }
                            None => {}
                        },
                        '"' => out.push_str("\\\""),
                        '\n' => out.push_str("\\n"),
                        _ => out.push(n),
                    }
                }
                out.push('"');
            }
            _ => out.push(c),
        }
    }
    out
}

/// Extracts the `{question, thought, answer}` object from a teacher reply.
pub fn parse_cot_triplet(reply: &str) -> Result<CotTriplet, GenError> {
    let (Some(start), Some(end)) = (reply.find('{'), reply.rfind('}')) else {
        return Err(GenError::Teacher("reply has no JSON object".into()));
    };
    if end < start {
        return Err(GenError::Teacher("reply has no JSON object".into()));
    }
    let body = &reply[start..=end];
    serde_json::from_str(body)
        .or_else(|_| serde_json::from_str(&single_to_double_quotes(body)))
        .map_err(|e| GenError::Teacher(format!("bad triplet: {e}")))
}

/// Replaces the question with the teacher's rewrite and attaches its
/// reasoning. The teacher's answer must match the sample's.
pub fn apply_cot(sample: InstructionSample, t: &CotTriplet) -> Result<InstructionSample, GenError> {
    if t.answer.trim() != sample.answer.trim() {
        return Err(GenError::Teacher(format!(
            "teacher answer {:?} differs from {:?}",
            t.answer, sample.answer
        )));
    }
    let mut s = sample;
    if let Some(m) = s.messages.iter_mut().find(|m| m.role == Role::User) {
        *m = Message::user(t.question.clone());
    }
    Ok(s.with_think(&t.thought))
}
