//! Multi-image samples over a pair of frames: object directions, camera
//! placement, camera motion and point correspondence.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataset::{SceneObject, ScenePack};
use crate::fov::{Point2D, Rescale};
use crate::geometry::{Pixel, Vec3};
use crate::visibility::{gen_correspondence, DepthMap, FrameView};

use super::relation::{
    classify_camera_motion, compass_relation, egocentric_relation, ground_bearing, Compass, Egocentric,
    MotionThresholds, RotationLabel, TranslationLabel,
};
use super::text::{
    pick, CAMCAM_FACING, CAMCAM_POSITION, CORRESPONDENCE, MOTION_PAN, MOTION_ROLL, MOTION_TILT, MOTION_TRANSLATION,
    OBJREL_CAMERA, OBJREL_DISTANCE, OBJREL_OBJECT,
};
use super::{
    choose_options, fill, inline_options, letter, media_for, meta, option_answer, sample_id, GenConfig, GenError,
    InstructionSample, Message, Task,
};

fn check_pair(pack: &ScenePack, pair: (usize, usize)) -> Result<(), GenError> {
    if pack.frames.len() < 2 {
        return Err(GenError::NotEnoughFrames {
            need: 2,
            have: pack.frames.len(),
        });
    }
    for f in [pair.0, pair.1] {
        if f >= pack.frames.len() {
            return Err(GenError::FrameOutOfRange(f));
        }
    }
    if pair.0 == pair.1 {
        return Err(GenError::NotEnoughFrames { need: 2, have: 1 });
    }
    Ok(())
}

fn ordinal(i: usize) -> &'static str {
    if i == 0 {
        "first"
    } else {
        "second"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjRelVariant {
    /// North runs from one anchor to another; ask for a third one's direction.
    Object,
    /// North runs from the first camera to an anchor.
    Camera,
    /// Which of two anchors is closer to a third.
    Distance,
}

/// Anchor objects of a frame pair: seen in exactly one of the two frames,
/// with a label that is unique among the objects of the pair. Returns each
/// anchor with the media index (0 or 1) of the frame it is seen in.
fn anchors(pack: &ScenePack, pair: (usize, usize)) -> Result<Vec<(&SceneObject, usize)>, GenError> {
    let in_pair: Vec<&SceneObject> = pack
        .objects
        .iter()
        .filter(|o| o.present_in(pair.0) || o.present_in(pair.1))
        .collect();
    if !in_pair.iter().any(|o| o.present_in(pair.0) && o.present_in(pair.1)) {
        return Err(GenError::NoValidAnchors);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &in_pair {
        *counts.entry(o.label.as_str()).or_default() += 1;
    }
    Ok(in_pair
        .into_iter()
        .filter(|o| o.present_in(pair.0) != o.present_in(pair.1) && counts[o.label.as_str()] == 1)
        .map(|o| (o, if o.present_in(pair.0) { 0 } else { 1 }))
        .collect())
}

fn level(objs: &[&SceneObject], max_gap: f64) -> bool {
    objs.iter()
        .all(|a| objs.iter().all(|b| (a.bbox.center.y - b.bbox.center.y).abs() < max_gap))
}

fn compass_distractors(correct: Compass) -> Vec<String> {
    Compass::ALL
        .iter()
        .filter(|c| **c != correct)
        .map(|c| c.name().to_string())
        .collect()
}

/// Direction or distance question built on anchor objects of two frames.
pub fn gen_objobj_relation(
    pack: &ScenePack,
    pair: (usize, usize),
    variant: ObjRelVariant,
    cfg: &GenConfig,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    check_pair(pack, pair)?;
    let anchors = anchors(pack, pair)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = anchors.len();
    let mut triples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i != j && j != k && i != k {
                    triples.push((i, j, k));
                }
            }
        }
    }
    triples.shuffle(&mut rng);

    let camera = pack.frames[pair.0].pose.translation();
    for (i, j, k) in triples {
        let (a, ia) = anchors[i];
        let (b, ib) = anchors[j];
        let (c, ic) = anchors[k];
        let built = match variant {
            ObjRelVariant::Object => {
                if ia == ib || !level(&[a, b, c], cfg.anchor_max_height_gap) {
                    continue;
                }
                let Ok(dir) = compass_relation(&a.bbox.center, &b.bbox.center, &c.bbox.center) else {
                    continue;
                };
                let (opts, pos) = choose_options(&mut rng, dir.name(), &compass_distractors(dir), cfg.num_options);
                let (tid, phr) = pick(&mut rng, &OBJREL_OBJECT);
                let q = fill(
                    phr,
                    &[("a", &a.label), ("b", &b.label), ("c", &c.label), ("options", &inline_options(&opts))],
                )?;
                (Task::ObjectObjectRelation, tid, q, option_answer(&opts, pos), vec![a.id, b.id, c.id])
            }
            ObjRelVariant::Camera => {
                // `a` only fixes the enumeration order here.
                if i > 0 || ib == ic || !level(&[b, c], cfg.anchor_max_height_gap) {
                    continue;
                }
                let Ok(dir) = compass_relation(camera, &b.bbox.center, &c.bbox.center) else {
                    continue;
                };
                let (opts, pos) = choose_options(&mut rng, dir.name(), &compass_distractors(dir), cfg.num_options);
                let (tid, phr) = pick(&mut rng, &OBJREL_CAMERA);
                let q = fill(
                    phr,
                    &[
                        ("a_image", ordinal(0)),
                        ("b", &b.label),
                        ("b_image", ordinal(ib)),
                        ("c", &c.label),
                        ("c_image", ordinal(ic)),
                        ("options", &inline_options(&opts)),
                    ],
                )?;
                (Task::CameraObjectRelation, tid, q, option_answer(&opts, pos), vec![b.id, c.id])
            }
            ObjRelVariant::Distance => {
                if !level(&[a, b, c], cfg.anchor_max_height_gap) {
                    continue;
                }
                let db = (b.bbox.center - a.bbox.center).norm();
                let dc = (c.bbox.center - a.bbox.center).norm();
                if (db - dc).abs() < cfg.distance_tie_tol {
                    continue;
                }
                let (tid, phr) = pick(&mut rng, &OBJREL_DISTANCE);
                let q = fill(phr, &[("a", &a.label), ("b", &b.label), ("c", &c.label)])?;
                let ans = if db < dc { &b.label } else { &c.label };
                (Task::ObjectObjectRelation, tid, q, ans.clone(), vec![a.id, b.id, c.id])
            }
        };
        let (task, tid, question, answer, ids) = built;
        let mut m = meta(pack, tid, seed, ids);
        m.params.insert("frames".into(), json!([pair.0, pair.1]));
        m.params.insert("variant".into(), json!(variant));
        return Ok(InstructionSample {
            id: sample_id(&pack.scene_id, task, seed),
            task,
            media: media_for(pack, &[pair.0, pair.1]),
            messages: vec![Message::user(question), Message::assistant(answer.clone())],
            answer,
            meta: m,
        });
    }
    Err(GenError::NoValidAnchors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CamCamVariant {
    /// Where the first camera stands, seen from the second.
    Position,
    /// Compass facing of the second camera given the first one's facing.
    Facing,
}

/// Relative placement or facing of the two cameras of a frame pair.
pub fn gen_camcam_relation(
    pack: &ScenePack,
    pair: (usize, usize),
    variant: CamCamVariant,
    num_options: usize,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    check_pair(pack, pair)?;
    let (pi, pj) = (&pack.frames[pair.0].pose, &pack.frames[pair.1].pose);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = meta(pack, String::new(), seed, Vec::new());
    let (question, answer) = match variant {
        CamCamVariant::Position => {
            let first_in_second = pj.inverse().transform_point(pi.translation());
            let rel = egocentric_relation(&Vec3::zeros(), &Vec3::z(), &first_in_second)?;
            let distractors: Vec<String> = Egocentric::ALL.iter().map(|e| e.name().to_string()).collect();
            let (opts, pos) = choose_options(&mut rng, rel.name(), &distractors, num_options);
            let (tid, phr) = pick(&mut rng, &CAMCAM_POSITION);
            m.template = tid;
            (fill(phr, &[("options", &inline_options(&opts))])?, option_answer(&opts, pos))
        }
        CamCamVariant::Facing => {
            let fi = pi.rotation() * Vec3::z();
            let fj = pj.rotation() * Vec3::z();
            let bearing = ground_bearing(&Vec3::zeros(), &fi, &fj)?;
            let steps = compass_relation(&Vec3::zeros(), &fi, &fj)?.index();
            let facing = Compass::from_index(rng.random_range(0..8));
            let dir = facing.turn(steps);
            let (opts, pos) = choose_options(&mut rng, dir.name(), &compass_distractors(dir), num_options);
            let (tid, phr) = pick(&mut rng, &CAMCAM_FACING);
            m.template = tid;
            m.params.insert("facing".into(), json!(facing));
            m.params.insert("bearing_deg".into(), json!(bearing));
            (
                fill(phr, &[("facing", facing.name()), ("options", &inline_options(&opts))])?,
                option_answer(&opts, pos),
            )
        }
    };
    m.params.insert("frames".into(), json!([pair.0, pair.1]));
    m.params.insert("variant".into(), json!(variant));
    Ok(InstructionSample {
        id: sample_id(&pack.scene_id, Task::CameraCameraRelation, seed),
        task: Task::CameraCameraRelation,
        media: media_for(pack, &[pair.0, pair.1]),
        messages: vec![Message::user(question), Message::assistant(answer.clone())],
        answer,
        meta: m,
    })
}

/// Every non-empty translation label set, one direction per axis, in X, Z, Y
/// order.
fn translation_combos() -> Vec<Vec<TranslationLabel>> {
    use TranslationLabel::*;
    let mut out = Vec::new();
    for x in [None, Some(Rightward), Some(Leftward)] {
        for z in [None, Some(Forward), Some(Backward)] {
            for y in [None, Some(Upward), Some(Downward)] {
                let set: Vec<TranslationLabel> = [x, z, y].into_iter().flatten().collect();
                if !set.is_empty() {
                    out.push(set);
                }
            }
        }
    }
    out
}

fn translation_option(labels: &[TranslationLabel]) -> String {
    format!("moving {}", TranslationLabel::phrase(labels))
}

/// Main translation direction of the second camera relative to the first.
pub fn gen_camera_motion_translation(
    pack: &ScenePack,
    pair: (usize, usize),
    th: &MotionThresholds,
    num_options: usize,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    check_pair(pack, pair)?;
    let motion = classify_camera_motion(&pack.frames[pair.0].pose, &pack.frames[pair.1].pose, th)?;
    if motion.translation.is_empty() {
        return Err(GenError::NoSignificantMotion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let correct = translation_option(&motion.translation);
    let distractors: Vec<String> = translation_combos().iter().map(|c| translation_option(c)).collect();
    let (opts, pos) = choose_options(&mut rng, &correct, &distractors, num_options);
    let (tid, phr) = pick(&mut rng, &MOTION_TRANSLATION);
    let question = fill(phr, &[("options", &inline_options(&opts))])?;
    let answer = option_answer(&opts, pos);
    let mut m = meta(pack, tid, seed, Vec::new());
    m.params.insert("frames".into(), json!([pair.0, pair.1]));
    m.params.insert("labels".into(), json!(motion.translation));
    Ok(InstructionSample {
        id: sample_id(&pack.scene_id, Task::CameraMotionTranslation, seed),
        task: Task::CameraMotionTranslation,
        media: media_for(pack, &[pair.0, pair.1]),
        messages: vec![Message::user(question), Message::assistant(answer.clone())],
        answer,
        meta: m,
    })
}

/// Two-way question about one significant rotation axis.
pub fn gen_camera_motion_rotation(
    pack: &ScenePack,
    pair: (usize, usize),
    th: &MotionThresholds,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    check_pair(pack, pair)?;
    let motion = classify_camera_motion(&pack.frames[pair.0].pose, &pack.frames[pair.1].pose, th)?;
    if motion.rotation.is_empty() {
        return Err(GenError::NoSignificantMotion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let label = motion.rotation[rng.random_range(0..motion.rotation.len())];
    let pool = match label {
        RotationLabel::PanLeft | RotationLabel::PanRight => &MOTION_PAN,
        RotationLabel::TiltUp | RotationLabel::TiltDown => &MOTION_TILT,
        RotationLabel::RollClockwise | RotationLabel::RollCounterclockwise => &MOTION_ROLL,
    };
    let (opts, pos) = choose_options(&mut rng, label.phrase(), &[label.opposite().phrase().to_string()], 2);
    let (tid, phr) = pick(&mut rng, pool);
    let question = fill(phr, &[("options", &inline_options(&opts))])?;
    let answer = option_answer(&opts, pos);
    let mut m = meta(pack, tid, seed, Vec::new());
    m.params.insert("frames".into(), json!([pair.0, pair.1]));
    m.params.insert("label".into(), json!(label));
    Ok(InstructionSample {
        id: sample_id(&pack.scene_id, Task::CameraMotionRotation, seed),
        task: Task::CameraMotionRotation,
        media: media_for(pack, &[pair.0, pair.1]),
        messages: vec![Message::user(question), Message::assistant(answer.clone())],
        answer,
        meta: m,
    })
}

fn to_current(pack: &ScenePack, frame: usize, px: &Pixel) -> [i64; 2] {
    let f = &pack.frames[frame];
    let (sx, sy) = f.pixel_scale();
    Point2D([px.u, px.v])
        .rescale(sx, sy, f.camera.width, f.camera.height)
        .to_int()
}

fn fmt_px(p: [i64; 2]) -> String {
    format!("({}, {})", p[0], p[1])
}

/// Which marked point of the second frame shows the same surface point as a
/// point of the first. Candidates are visible points of one instance; depth
/// maps are those of the two frames.
pub fn gen_correspondence_mcq(
    pack: &ScenePack,
    depths: (&DepthMap, &DepthMap),
    pair: (usize, usize),
    object: u32,
    cfg: &GenConfig,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    check_pair(pack, pair)?;
    let obj = pack.object(object).ok_or(GenError::UnknownObject(object))?;
    let points = obj.point_cloud();
    if points.is_empty() {
        return Err(GenError::MissingReference { id: object, kind: "points" });
    }
    let (fa, fb) = (&pack.frames[pair.0], &pack.frames[pair.1]);
    let va = FrameView::new(&fa.pose, fa.recorded_camera(), depths.0)
        .map_err(|e| GenError::NoMatchingObjects(e.to_string()))?;
    let vb = FrameView::new(&fb.pose, fb.recorded_camera(), depths.1)
        .map_err(|e| GenError::NoMatchingObjects(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = gen_correspondence(&va, &vb, &points, cfg.points_per_instance, rng.random(), cfg.rel_tol);
    found.shuffle(&mut rng);

    let mut chosen: Vec<usize> = Vec::new();
    for (i, c) in found.iter().enumerate() {
        let p = to_current(pack, pair.1, &c.pixel_b);
        let far_enough = chosen.iter().all(|&j| {
            let q = to_current(pack, pair.1, &found[j].pixel_b);
            (((p[0] - q[0]).pow(2) + (p[1] - q[1]).pow(2)) as f64).sqrt() >= cfg.min_option_separation_px
        });
        if far_enough {
            chosen.push(i);
        }
        if chosen.len() == cfg.num_options.max(2) {
            break;
        }
    }
    if chosen.len() < 2 {
        return Err(GenError::NotEnoughCandidates);
    }
    // The first pick is the true match; shuffle its slot among the options.
    let target = chosen[0];
    chosen.shuffle(&mut rng);
    let pos = chosen.iter().position(|&i| i == target).expect("target chosen");

    let names: Vec<String> = (0..chosen.len()).map(|i| format!("point-{}", letter(i))).collect();
    let candidates: Vec<String> = chosen
        .iter()
        .zip(&names)
        .map(|(&i, n)| format!("{n} {}", fmt_px(to_current(pack, pair.1, &found[i].pixel_b))))
        .collect();
    let options: Vec<String> = names.iter().enumerate().map(|(i, n)| format!("{}: {n}", letter(i))).collect();
    let (tid, phr) = pick(&mut rng, &CORRESPONDENCE);
    let question = fill(
        phr,
        &[
            ("point", &fmt_px(to_current(pack, pair.0, &found[target].pixel_a))),
            ("candidates", &candidates.join(", ")),
            ("options", &options.join(",\n")),
        ],
    )?;
    let answer = options[pos].clone();
    let mut m = meta(pack, tid, seed, vec![object]);
    let p = found[target].point;
    m.params.insert("frames".into(), json!([pair.0, pair.1]));
    m.params.insert("point".into(), json!([p.x, p.y, p.z]));
    m.params.insert(
        "candidates".into(),
        json!(chosen.iter().map(|&i| to_current(pack, pair.1, &found[i].pixel_b)).collect::<Vec<_>>()),
    );
    Ok(InstructionSample {
        id: sample_id(&pack.scene_id, Task::Correspondence, seed),
        task: Task::Correspondence,
        media: media_for(pack, &[pair.0, pair.1]),
        messages: vec![Message::user(question), Message::assistant(answer.clone())],
        answer,
        meta: m,
    })
}
