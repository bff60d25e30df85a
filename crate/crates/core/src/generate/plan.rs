//! Per-scene sampling plan: draws generator parameters from a seed, retries
//! rejected draws and tallies the outcome.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::{SceneObject, ScenePack};
use crate::visibility::DepthMap;

use super::detection::{gen_3ddet_sample, gen_grounding, TurnMode};
use super::multi::{
    gen_camcam_relation, gen_camera_motion_rotation, gen_camera_motion_translation, gen_correspondence_mcq,
    gen_objobj_relation, CamCamVariant, ObjRelVariant,
};
use super::single::{
    gen_depth_order, gen_depth_point_compare, gen_distance_compare, gen_measurement, gen_scene_caption, DepthFormat,
    MeasureKind, MeasureUnit,
};
use super::teacher::{apply_cot, build_teacher_prompt, parse_caption, parse_cot_triplet, QaPair, TeacherClient, TeacherKind};
use super::video::{gen_video_count, gen_video_direction, gen_video_distance, gen_video_order};
use super::{digest64, GenConfig, GenError, InstructionSample, Task};

/// Draws per requested sample before the task is given up.
pub const MAX_ATTEMPTS: usize = 12;

/// Seed for one draw, derived from the run seed and a path of names.
pub fn derive_seed(root: u64, parts: &[&str]) -> u64 {
    let root = root.to_string();
    let mut all = vec![root.as_str()];
    all.extend_from_slice(parts);
    digest64(&all)
}

/// Everything a scene contributes to generation.
pub struct SceneInputs<'a> {
    pub pack: &'a ScenePack,
    /// Depth maps by frame index, at the recorded camera resolution.
    pub depths: Vec<Option<DepthMap>>,
    pub teacher: Option<&'a dyn TeacherClient>,
    /// Few-shot example blocks for chain-of-thought prompts.
    pub few_shot: BTreeMap<TeacherKind, String>,
}

impl<'a> SceneInputs<'a> {
    pub fn new(pack: &'a ScenePack) -> Self {
        Self {
            pack,
            depths: Vec::new(),
            teacher: None,
            few_shot: BTreeMap::new(),
        }
    }

    fn depth(&self, frame: usize) -> Option<&DepthMap> {
        self.depths.get(frame).and_then(Option::as_ref)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GenReport {
    /// Samples produced per task tag.
    pub generated: BTreeMap<String, usize>,
    /// Rejected draws per task tag and error message kind.
    pub rejected: BTreeMap<String, BTreeMap<String, usize>>,
    /// Tasks that do not apply to the scene, with the reason.
    pub skipped: BTreeMap<String, String>,
    /// Samples kept without reasoning because the teacher had no reply.
    pub cot_missing: usize,
}

impl GenReport {
    pub fn merge(&mut self, other: &GenReport) {
        for (k, v) in &other.generated {
            *self.generated.entry(k.clone()).or_default() += v;
        }
        for (k, m) in &other.rejected {
            let e = self.rejected.entry(k.clone()).or_default();
            for (r, v) in m {
                *e.entry(r.clone()).or_default() += v;
            }
        }
        for (k, v) in &other.skipped {
            self.skipped.entry(k.clone()).or_insert_with(|| v.clone());
        }
        self.cot_missing += other.cot_missing;
    }
}

fn error_kind(e: &GenError) -> String {
    let dbg = format!("{e:?}");
    dbg.split(['(', ' ', '{']).next().unwrap_or("").to_string()
}

fn is_video(pack: &ScenePack) -> bool {
    pack.fps.is_some()
}

/// Why a task cannot run on this scene at all, if so.
fn not_applicable(task: Task, inputs: &SceneInputs) -> Option<String> {
    let pack = inputs.pack;
    let frames = pack.frames.len();
    match task.family() {
        "multi_image" if frames < 2 => return Some("needs at least two frames".into()),
        "video" if !is_video(pack) => return Some("scene has no frame rate".into()),
        _ => {}
    }
    match task {
        Task::Detection3d if frames != 1 => Some("single-image detection needs a one-frame scene".into()),
        Task::Detection3d | Task::Detection3dMulti if !pack.fov_unified() => Some("scene is not FoV-unified".into()),
        Task::DepthPointCompare if inputs.depth(0).is_none() => Some("first frame has no depth map".into()),
        Task::Correspondence if inputs.depths.iter().filter(|d| d.is_some()).count() < 2 => {
            Some("needs depth maps for two frames".into())
        }
        Task::SceneCaptionSingle | Task::SceneCaptionMulti if inputs.teacher.is_none() => {
            Some("captions need a teacher client".into())
        }
        Task::SceneCaptionSingle | Task::SceneCaptionMulti if in_first(pack).is_empty() => {
            Some("no objects in the first frame".into())
        }
        _ => None,
    }
}

fn in_first(pack: &ScenePack) -> Vec<&SceneObject> {
    pack.objects.iter().filter(|o| o.present_in(0)).collect()
}

fn pick_ids(rng: &mut ChaCha8Rng, pool: &[&SceneObject], k: usize) -> Result<Vec<u32>, GenError> {
    if pool.len() < k {
        return Err(GenError::NotEnoughObjects { need: k, have: pool.len() });
    }
    Ok(pool.choose_multiple(rng, k).map(|o| o.id).collect())
}

fn unique_label_objects(pack: &ScenePack) -> Vec<&SceneObject> {
    pack.objects
        .iter()
        .filter(|o| pack.objects.iter().filter(|p| p.label == o.label).count() == 1)
        .collect()
}

fn random_pair(rng: &mut ChaCha8Rng, frames: usize) -> (usize, usize) {
    let i = rng.random_range(0..frames - 1);
    (i, rng.random_range(i + 1..frames))
}

fn draw(task: Task, inputs: &SceneInputs, cfg: &GenConfig, seed: u64) -> Result<InstructionSample, GenError> {
    let pack = inputs.pack;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen_seed: u64 = rng.random();
    let frames = pack.frames.len();
    match task {
        Task::DepthOrder => {
            let pool = in_first(pack);
            let hi = cfg.max_depth_order_objects.min(pool.len());
            if hi < 2 {
                return Err(GenError::NotEnoughObjects { need: 2, have: pool.len() });
            }
            let k = rng.random_range(2..=hi);
            let ids = pick_ids(&mut rng, &pool, k)?;
            let format = *DepthFormat::ALL.choose(&mut rng).expect("non-empty");
            gen_depth_order(pack, &ids, format, cfg.min_depth_gap, gen_seed)
        }
        Task::DepthPointCompare => {
            let depth = inputs.depth(0).ok_or(GenError::NoDepth(0))?;
            let mut px = || (rng.random_range(0..depth.width()), rng.random_range(0..depth.height()));
            let (a, b) = (px(), px());
            gen_depth_point_compare(pack, depth, a, b, cfg.min_depth_gap, gen_seed)
        }
        Task::DistanceCompare => {
            let pool = in_first(pack);
            let k = rng.random_range(3..=4).min(pool.len());
            let ids = pick_ids(&mut rng, &pool, k.max(3))?;
            gen_distance_compare(pack, ids[0], &ids[1..], cfg.distance_tie_tol, gen_seed)
        }
        Task::Detection3d | Task::Detection3dMulti => {
            let mode = if rng.random_bool(0.5) { TurnMode::Single } else { TurnMode::Multi };
            let mut labels: Vec<String> = pack.objects.iter().map(|o| o.label.clone()).collect();
            labels.sort();
            labels.dedup();
            if rng.random_bool(0.5) || labels.is_empty() {
                gen_3ddet_sample(pack, None, mode, gen_seed)
            } else {
                labels.shuffle(&mut rng);
                let k = rng.random_range(1..=labels.len().min(3));
                gen_3ddet_sample(pack, Some(&labels[..k]), mode, gen_seed)
            }
        }
        Task::Grounding3d => {
            let pool = if frames == 1 { in_first(pack) } else { pack.objects.iter().collect() };
            let obj = pool.choose(&mut rng).ok_or(GenError::NotEnoughObjects { need: 1, have: 0 })?;
            gen_grounding(pack, &obj.bbox, gen_seed)
        }
        Task::Measurement => {
            let pool = in_first(pack);
            let k = rng.random_range(1..=3).min(pool.len()).max(1);
            let ids = pick_ids(&mut rng, &pool, k)?;
            let kind = if rng.random_bool(0.5) { MeasureKind::Height } else { MeasureKind::MaxDim };
            let unit = if rng.random_bool(0.5) { MeasureUnit::Cm } else { MeasureUnit::M };
            gen_measurement(pack, &ids, kind, unit, gen_seed)
        }
        Task::SceneCaptionSingle | Task::SceneCaptionMulti => {
            let teacher = inputs.teacher.ok_or_else(|| GenError::Teacher("no teacher client".into()))?;
            let prompt = build_teacher_prompt(TeacherKind::SceneCaption, pack, None, None, None)?;
            let caption = parse_caption(&teacher.complete(&prompt)?)?;
            let shown: Vec<usize> = if task == Task::SceneCaptionSingle { vec![0] } else { (0..frames).collect() };
            let mut s = gen_scene_caption(pack, &shown, &caption, gen_seed)?;
            s.task = task;
            s.id = super::sample_id(&pack.scene_id, task, gen_seed);
            Ok(s)
        }
        Task::Correspondence => {
            let with_depth: Vec<usize> = (0..frames).filter(|&f| inputs.depth(f).is_some()).collect();
            let pair = {
                let mut two: Vec<usize> = with_depth.choose_multiple(&mut rng, 2).copied().collect();
                two.sort();
                (two[0], two[1])
            };
            let pool: Vec<&SceneObject> = pack
                .objects
                .iter()
                .filter(|o| o.present_in(pair.0) && o.present_in(pair.1) && !o.points.is_empty())
                .collect();
            let obj = pool.choose(&mut rng).ok_or(GenError::NoMatchingObjects("no shared object with points".into()))?;
            let depths = (inputs.depth(pair.0).expect("filtered"), inputs.depth(pair.1).expect("filtered"));
            gen_correspondence_mcq(pack, depths, pair, obj.id, cfg, gen_seed)
        }
        Task::ObjectObjectRelation => {
            let variant = if rng.random_bool(0.5) { ObjRelVariant::Object } else { ObjRelVariant::Distance };
            gen_objobj_relation(pack, random_pair(&mut rng, frames), variant, cfg, gen_seed)
        }
        Task::CameraObjectRelation => {
            gen_objobj_relation(pack, random_pair(&mut rng, frames), ObjRelVariant::Camera, cfg, gen_seed)
        }
        Task::CameraCameraRelation => {
            let variant = if rng.random_bool(0.5) { CamCamVariant::Position } else { CamCamVariant::Facing };
            gen_camcam_relation(pack, random_pair(&mut rng, frames), variant, cfg.num_options, gen_seed)
        }
        Task::CameraMotionTranslation => gen_camera_motion_translation(
            pack,
            random_pair(&mut rng, frames),
            &cfg.motion,
            cfg.num_options,
            gen_seed,
        ),
        Task::CameraMotionRotation => {
            gen_camera_motion_rotation(pack, random_pair(&mut rng, frames), &cfg.motion, gen_seed)
        }
        Task::VideoAppearanceOrder => {
            let pool = unique_label_objects(pack);
            let k = rng.random_range(3..=4).min(pool.len()).max(2);
            let ids = pick_ids(&mut rng, &pool, k)?;
            gen_video_order(pack, &ids, cfg.num_options, gen_seed)
        }
        Task::VideoCount => {
            let obj = pack.objects.choose(&mut rng).ok_or(GenError::NotEnoughObjects { need: 1, have: 0 })?;
            gen_video_count(pack, &obj.label, false, gen_seed)
        }
        Task::VideoObjectDistance => {
            let pool = unique_label_objects(pack);
            let k = rng.random_range(3..=4).min(pool.len()).max(3);
            let ids = pick_ids(&mut rng, &pool, k)?;
            gen_video_distance(pack, ids[0], &ids[1..], cfg.distance_tie_tol, gen_seed)
        }
        Task::VideoObjectDirection => {
            let pool = unique_label_objects(pack);
            let ids = pick_ids(&mut rng, &pool, 3)?;
            gen_video_direction(pack, [ids[0], ids[1], ids[2]], cfg.num_options, gen_seed)
        }
    }
}

fn cot_kind(task: Task) -> Option<TeacherKind> {
    match task {
        Task::ObjectObjectRelation | Task::CameraObjectRelation => Some(TeacherKind::CotObjRel),
        Task::CameraMotionRotation => Some(TeacherKind::CotCamRotation),
        Task::CameraMotionTranslation => Some(TeacherKind::CotCamTranslation),
        _ => None,
    }
}

/// Attaches teacher reasoning when a teacher and few-shot block are
/// available. Returns `None` when the teacher has nothing for this prompt.
fn with_cot(inputs: &SceneInputs, s: &InstructionSample) -> Result<Option<InstructionSample>, GenError> {
    let (Some(teacher), Some(kind)) = (inputs.teacher, cot_kind(s.task)) else {
        return Ok(None);
    };
    let Some(few_shot) = inputs.few_shot.get(&kind) else {
        return Ok(None);
    };
    let mut qa = QaPair::from_sample(s);
    qa.process = Some(format!("Computed answer: {}", s.answer));
    let prompt = build_teacher_prompt(kind, inputs.pack, Some(&qa), Some(few_shot), None)?;
    match teacher.complete(&prompt) {
        Ok(reply) => Ok(parse_cot_triplet(&reply).and_then(|t| apply_cot(s.clone(), &t)).ok()),
        Err(_) => Ok(None),
    }
}

/// Generates up to `per_task` samples of each task for one scene. Each
/// sample's seed is derived from `seed`, the scene id, the task tag, the
/// sample index and the attempt number, so output does not depend on which
/// other tasks are requested.
pub fn generate_scene(
    inputs: &SceneInputs,
    tasks: &[Task],
    cfg: &GenConfig,
    seed: u64,
    per_task: usize,
) -> Result<(Vec<InstructionSample>, GenReport), GenError> {
    let pack = inputs.pack;
    if pack.frames.is_empty() {
        return Err(GenError::NotEnoughFrames { need: 1, have: 0 });
    }
    if !pack.frames[0].pose.is_exact_identity() {
        return Err(GenError::NotFrameOne);
    }
    let mut out = Vec::new();
    let mut report = GenReport::default();
    for &task in tasks {
        if let Some(why) = not_applicable(task, inputs) {
            report.skipped.insert(task.tag().into(), why);
            continue;
        }
        for k in 0..per_task {
            let index = k.to_string();
            for attempt in 0..MAX_ATTEMPTS {
                let s = derive_seed(seed, &[&pack.scene_id, task.tag(), &index, &attempt.to_string()]);
                match draw(task, inputs, cfg, s) {
                    Ok(sample) => {
                        let sample = match with_cot(inputs, &sample)? {
                            Some(with) => with,
                            None => {
                                if inputs.teacher.is_some() && cot_kind(task).is_some() {
                                    report.cot_missing += 1;
                                }
                                sample
                            }
                        };
                        *report.generated.entry(task.tag().into()).or_default() += 1;
                        out.push(sample);
                        break;
                    }
                    Err(e) if e.is_rejection() || matches!(e, GenError::Teacher(_)) => {
                        *report
                            .rejected
                            .entry(task.tag().into())
                            .or_default()
                            .entry(error_kind(&e))
                            .or_default() += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::fixtures::{frame, object, pack, single};
    use crate::geometry::{EulerAngles, Pose, Vec3};

    fn room() -> ScenePack {
        single(vec![
            object(1, "chair", [-1.0, 0.3, 2.0], [0.5, 0.9, 0.5], 1),
            object(2, "table", [0.5, 0.4, 3.0], [1.2, 0.7, 0.8], 1),
            object(3, "lamp", [1.5, -0.2, 4.5], [0.3, 1.5, 0.3], 1),
            object(4, "sofa", [0.0, 0.3, 6.0], [2.0, 0.8, 0.9], 1),
        ])
    }

    #[test]
    fn seeds_depend_on_every_part() {
        let a = derive_seed(1, &["s", "depth_order", "0"]);
        assert_ne!(a, derive_seed(2, &["s", "depth_order", "0"]));
        assert_ne!(a, derive_seed(1, &["s", "depth_order", "1"]));
        assert_ne!(derive_seed(1, &["ab", "c"]), derive_seed(1, &["a", "bc"]));
        assert_eq!(a, derive_seed(1, &["s", "depth_order", "0"]));
    }

    #[test]
    fn single_image_scene_covers_its_tasks() {
        let p = room();
        let inputs = SceneInputs::new(&p);
        let (samples, report) = generate_scene(&inputs, &Task::ALL, &GenConfig::default(), 7, 3).unwrap();
        for t in [Task::DepthOrder, Task::DistanceCompare, Task::Detection3d, Task::Grounding3d, Task::Measurement] {
            assert_eq!(report.generated.get(t.tag()), Some(&3), "{t}: {report:?}");
        }
        for t in [Task::Correspondence, Task::VideoCount, Task::SceneCaptionSingle, Task::Detection3dMulti] {
            assert!(report.skipped.contains_key(t.tag()), "{t}");
        }
        let ids: std::collections::BTreeSet<_> = samples.iter().map(|s| &s.id).collect();
        assert_eq!(ids.len(), samples.len());
    }

    #[test]
    fn generation_is_deterministic_and_task_independent() {
        let p = room();
        let inputs = SceneInputs::new(&p);
        let cfg = GenConfig::default();
        let (a, _) = generate_scene(&inputs, &Task::ALL, &cfg, 11, 2).unwrap();
        let (b, _) = generate_scene(&inputs, &Task::ALL, &cfg, 11, 2).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let (only, _) = generate_scene(&inputs, &[Task::Measurement], &cfg, 11, 2).unwrap();
        let from_all: Vec<_> = a.iter().filter(|s| s.task == Task::Measurement).cloned().collect();
        assert_eq!(only, from_all);
    }

    #[test]
    fn multi_frame_scene_needs_frame_one_origin() {
        let moved = Pose::from_translation(Vec3::new(0.0, 0.0, 1.0));
        let p = pack(vec![frame("a", moved.clone()), frame("b", Pose::identity())], vec![]);
        assert_eq!(
            generate_scene(&SceneInputs::new(&p), &Task::ALL, &GenConfig::default(), 0, 1).unwrap_err(),
            GenError::NotFrameOne
        );
    }

    #[test]
    fn camera_tasks_on_a_pair() {
        let second = Pose::from_euler(&EulerAngles::from_degrees(0.0, 25.0, 0.0), Vec3::new(0.6, 0.0, 0.4));
        let mut objs = vec![
            object(1, "desk", [0.0, 0.5, 3.0], [1.5, 0.8, 0.7], 2),
            object(2, "printer", [1.5, 0.2, 4.0], [0.4; 3], 2),
            object(3, "bin", [-1.0, 0.6, 5.0], [0.3; 3], 2),
            object(4, "plant", [2.5, 0.1, 2.5], [0.3; 3], 2),
        ];
        objs[1].in_frames = vec![false, true];
        objs[2].in_frames = vec![true, false];
        objs[3].in_frames = vec![false, true];
        let p = pack(vec![frame("a", Pose::identity()), frame("b", second)], objs);
        let (samples, report) = generate_scene(&SceneInputs::new(&p), &Task::ALL, &GenConfig::default(), 3, 2).unwrap();
        for t in [Task::CameraMotionRotation, Task::CameraMotionTranslation, Task::CameraCameraRelation] {
            assert_eq!(report.generated.get(t.tag()), Some(&2), "{t}: {report:?}");
        }
        assert!(samples.iter().all(|s| s.task.family() != "video"));
    }
}
