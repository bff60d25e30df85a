//! Single-image samples: depth ordering, point depth, distance comparison,
//! measurement and scene captions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataset::{SceneObject, ScenePack};
use crate::fov::{Point2D, Rescale};
use crate::visibility::DepthMap;

use super::text::{
    pick, Pool, CAPTION_MULTI, CAPTION_SINGLE, DEPTH_BOX_FAR, DEPTH_BOX_NEAR, DEPTH_MARKER_FAR, DEPTH_MARKER_NEAR,
    DEPTH_POINT_COMPARE, DEPTH_POINT_FAR, DEPTH_POINT_NEAR, DEPTH_TEXT_FAR, DEPTH_TEXT_NEAR, DISTANCE_CLOSEST,
    DISTANCE_FARTHEST, MEASURE_HEIGHT, MEASURE_MAX,
};
use super::{
    display_names, fill, find_objects, fmt2, letter, media_for, meta, sample_id, GenError, InstructionSample,
    Message, Task,
};

/// How objects are referred to in a depth-ordering question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthFormat {
    /// Lettered labels: `A.sink, B.lamp`.
    Text,
    /// Pixel coordinates of each object's mask center.
    Point,
    /// 2D boxes, answered as a sorted JSON list.
    Box2d,
    /// Drawn markers named `box-A`, `box-B`, …
    VisualPrompt,
}

impl DepthFormat {
    pub const ALL: [DepthFormat; 4] = [
        DepthFormat::Text,
        DepthFormat::Point,
        DepthFormat::Box2d,
        DepthFormat::VisualPrompt,
    ];
}

fn require_first_frame(objs: &[&SceneObject]) -> Result<(), GenError> {
    match objs.iter().find(|o| !o.present_in(0)) {
        Some(o) => Err(GenError::NoMatchingObjects(format!("object {} is not in the first frame", o.id))),
        None => Ok(()),
    }
}

fn box2d_json(entries: &[([i64; 4], &str)]) -> String {
    let lines: Vec<String> = entries
        .iter()
        .map(|(b, label)| {
            format!(
                "\t{{\"bbox_2d\":[{},{},{},{}],\"label\":{}}}",
                b[0],
                b[1],
                b[2],
                b[3],
                serde_json::to_string(label).expect("strings serialize")
            )
        })
        .collect();
    format!("[\n{}\n]", lines.join(",\n"))
}

/// Orders objects by center depth. The question lists them in `ids` order.
pub fn gen_depth_order(
    pack: &ScenePack,
    ids: &[u32],
    format: DepthFormat,
    min_gap: f64,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    let objs = find_objects(pack, ids)?;
    if objs.len() < 2 {
        return Err(GenError::NotEnoughObjects {
            need: 2,
            have: objs.len(),
        });
    }
    require_first_frame(&objs)?;
    let mut order: Vec<usize> = (0..objs.len()).collect();
    order.sort_by(|&a, &b| objs[a].bbox.center.z.total_cmp(&objs[b].bbox.center.z));
    let gap = order
        .windows(2)
        .map(|w| objs[w[1]].bbox.center.z - objs[w[0]].bbox.center.z)
        .fold(f64::INFINITY, f64::min);
    if gap < min_gap {
        return Err(GenError::InsufficientSeparation { gap, min: min_gap });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let near_first = rng.random_bool(0.5);
    if !near_first {
        order.reverse();
    }
    let pool = |near: &'static Pool, far: &'static Pool| if near_first { near } else { far };

    let (pool, listing, answer) = match format {
        DepthFormat::Text => {
            let listing: Vec<String> = objs.iter().enumerate().map(|(i, o)| format!("{}.{}", letter(i), o.label)).collect();
            let answer: Vec<String> = order.iter().map(|&i| letter(i).to_string()).collect();
            (pool(&DEPTH_TEXT_NEAR, &DEPTH_TEXT_FAR), listing.join(", "), answer.join(", "))
        }
        DepthFormat::VisualPrompt => {
            for o in &objs {
                if o.refs.marker.is_none() {
                    return Err(GenError::MissingReference { id: o.id, kind: "marker" });
                }
            }
            let listing: Vec<String> = (0..objs.len()).map(|i| format!("box-{}", letter(i))).collect();
            let answer: Vec<String> = order.iter().map(|&i| format!("box-{} ({})", letter(i), objs[i].label)).collect();
            (pool(&DEPTH_MARKER_NEAR, &DEPTH_MARKER_FAR), listing.join(", "), answer.join(", "))
        }
        DepthFormat::Point => {
            let mut listing = Vec::new();
            for (i, o) in objs.iter().enumerate() {
                let p = pack.point2d(o).ok_or(GenError::MissingReference { id: o.id, kind: "point" })?.to_int();
                listing.push(format!("point-{} ({}, {})", letter(i), p[0], p[1]));
            }
            let answer: Vec<String> =
                order.iter().map(|&i| format!("point-{} ({})", letter(i), objs[i].label)).collect();
            (pool(&DEPTH_POINT_NEAR, &DEPTH_POINT_FAR), listing.join(", "), answer.join(", "))
        }
        DepthFormat::Box2d => {
            let mut boxes = Vec::new();
            for o in &objs {
                boxes.push(pack.box2d(o).ok_or(GenError::MissingReference { id: o.id, kind: "box2d" })?.to_int());
            }
            let listing: Vec<String> =
                boxes.iter().map(|b| format!("[{}, {}, {}, {}]", b[0], b[1], b[2], b[3])).collect();
            let sorted: Vec<([i64; 4], &str)> = order.iter().map(|&i| (boxes[i], objs[i].label.as_str())).collect();
            (pool(&DEPTH_BOX_NEAR, &DEPTH_BOX_FAR), listing.join("\n"), box2d_json(&sorted))
        }
    };
    let (tid, phr) = pick(&mut rng, pool);
    let question = fill(phr, &[("objects", &listing)])?;
    let mut m = meta(pack, tid, seed, ids.to_vec());
    m.params.insert("format".into(), json!(format));
    m.params.insert("near_first".into(), json!(near_first));
    m.params.insert("order".into(), json!(order.iter().map(|&i| objs[i].id).collect::<Vec<_>>()));
    Ok(InstructionSample {
        id: sample_id(&pack.scene_id, Task::DepthOrder, seed),
        task: Task::DepthOrder,
        media: media_for(pack, &[0]),
        messages: vec![Message::user(question), Message::assistant(answer.clone())],
        answer,
        meta: m,
    })
}

fn valid_depth(depth: &DepthMap, px: (u32, u32)) -> Option<f64> {
    depth
        .get(px.0, px.1)
        .map(f64::from)
        .filter(|d| d.is_finite() && *d > 0.0)
}

/// Which of two pixels of the first frame is closer, read from its depth map.
/// Pixels are given in depth-map coordinates.
pub fn gen_depth_point_compare(
    pack: &ScenePack,
    depth: &DepthMap,
    a: (u32, u32),
    b: (u32, u32),
    min_gap: f64,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    let da = valid_depth(depth, a).ok_or(GenError::NoDepth(0))?;
    let db = valid_depth(depth, b).ok_or(GenError::NoDepth(0))?;
    let gap = (da - db).abs();
    if gap < min_gap {
        return Err(GenError::InsufficientSeparation { gap, min: min_gap });
    }
    let frame = &pack.frames[0];
    let (sx, sy) = frame.pixel_scale();
    let show = |p: (u32, u32)| {
        let q = Point2D([p.0 as f64 + 0.5, p.1 as f64 + 0.5])
            .rescale(sx, sy, frame.camera.width, frame.camera.height)
            .to_int();
        format!("({}, {})", q[0], q[1])
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tid, phr) = pick(&mut rng, &DEPTH_POINT_COMPARE);
    let question = fill(phr, &[("a", &show(a)), ("b", &show(b))])?;
    let answer = if da < db { "point-A" } else { "point-B" }.to_string();
    let mut m = meta(pack, tid, seed, Vec::new());
    m.params.insert("pixels".into(), json!([[a.0, a.1], [b.0, b.1]]));
    Ok(InstructionSample {
        id: sample_id(&pack.scene_id, Task::DepthPointCompare, seed),
        task: Task::DepthPointCompare,
        media: media_for(pack, &[0]),
        messages: vec![Message::user(question), Message::assistant(answer.clone())],
        answer,
        meta: m,
    })
}

/// `the a or the b`, `the a, the b or the c`
pub(crate) fn or_list(names: &[String], article: bool) -> String {
    let items: Vec<String> = names
        .iter()
        .map(|n| if article { format!("the {n}") } else { n.clone() })
        .collect();
    match items.as_slice() {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} or {last}", init.join(", ")),
    }
}

/// Which candidate is closest to (or farthest from) the anchor, by center
/// distance.
pub fn gen_distance_compare(
    pack: &ScenePack,
    anchor: u32,
    candidates: &[u32],
    tie_tol: f64,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    if candidates.len() < 2 {
        return Err(GenError::NotEnoughObjects {
            need: 2,
            have: candidates.len(),
        });
    }
    if candidates.contains(&anchor) {
        return Err(GenError::NotEnoughCandidates);
    }
    let mut all = vec![anchor];
    all.extend_from_slice(candidates);
    let objs = find_objects(pack, &all)?;
    require_first_frame(&objs)?;
    let names = display_names(&objs);
    let a = objs[0].bbox.center;
    let dists: Vec<f64> = objs[1..].iter().map(|o| (o.bbox.center - a).norm()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let closest = rng.random_bool(0.5);
    let mut ranked: Vec<usize> = (0..dists.len()).collect();
    ranked.sort_by(|&x, &y| dists[x].total_cmp(&dists[y]));
    if !closest {
        ranked.reverse();
    }
    let gap = (dists[ranked[0]] - dists[ranked[1]]).abs();
    if gap < tie_tol {
        return Err(GenError::DistanceTie { gap, tol: tie_tol });
    }
    let best = ranked[0];
    let (tid, phr) = pick(&mut rng, if closest { &DISTANCE_CLOSEST } else { &DISTANCE_FARTHEST });
    let question = fill(phr, &[("candidates", &or_list(&names[1..], true)), ("anchor", &names[0])])?;
    let answer = names[best + 1].clone();
    let content = if rng.random_bool(0.5) {
        let mut lines = vec!["The distance relationships are:".to_string()];
        for (i, d) in dists.iter().enumerate() {
            lines.push(format!("Distance[{}, {}]={}m", names[0], names[i + 1], fmt2(*d)));
        }
        lines.push(format!("So, the answer is {answer}."));
        lines.join("\n")
    } else {
        answer.clone()
    };
    let mut m = meta(pack, tid, seed, all);
    m.params.insert("closest".into(), json!(closest));
    Ok(InstructionSample {
        id: sample_id(&pack.scene_id, Task::DistanceCompare, seed),
        task: Task::DistanceCompare,
        media: media_for(pack, &[0]),
        messages: vec![Message::user(question), Message::assistant(content)],
        answer,
        meta: m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    /// Extent along the box's Y (down) axis.
    Height,
    /// Largest of the three extents.
    MaxDim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureUnit {
    Cm,
    M,
}

impl MeasureUnit {
    fn name(self) -> &'static str {
        match self {
            MeasureUnit::Cm => "centimeters",
            MeasureUnit::M => "meters",
        }
    }

    /// `71 cm` or `0.97 m`.
    pub fn format(self, meters: f64) -> String {
        match self {
            MeasureUnit::Cm => format!("{} cm", (meters * 100.0).round() as i64),
            MeasureUnit::M => format!("{} m", fmt2(meters)),
        }
    }
}

impl MeasureKind {
    pub fn value(self, obj: &SceneObject) -> f64 {
        let s = obj.bbox.size();
        match self {
            MeasureKind::Height => s.y,
            MeasureKind::MaxDim => s.x.max(s.y).max(s.z),
        }
    }
}

fn referred(pack: &ScenePack, obj: &SceneObject, name: &str) -> String {
    if let Some(m) = obj.refs.marker {
        format!("{name} (specified at point-{m})")
    } else if let Some(p) = pack.point2d(obj) {
        let p = p.to_int();
        format!("{name} at pixel ({}, {})", p[0], p[1])
    } else {
        name.to_string()
    }
}

/// Height or largest dimension of each object, one turn per object.
pub fn gen_measurement(
    pack: &ScenePack,
    ids: &[u32],
    kind: MeasureKind,
    unit: MeasureUnit,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    let objs = find_objects(pack, ids)?;
    if objs.is_empty() {
        return Err(GenError::NotEnoughObjects { need: 1, have: 0 });
    }
    require_first_frame(&objs)?;
    let names = display_names(&objs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = match kind {
        MeasureKind::Height => &MEASURE_HEIGHT,
        MeasureKind::MaxDim => &MEASURE_MAX,
    };
    let mut messages = Vec::new();
    let mut templates = Vec::new();
    let mut answer = String::new();
    for (o, name) in objs.iter().zip(&names) {
        let (tid, phr) = pick(&mut rng, pool);
        let q = fill(phr, &[("object", &referred(pack, o, name)), ("unit", unit.name())])?;
        answer = unit.format(kind.value(o));
        messages.push(Message::user(q));
        messages.push(Message::assistant(answer.clone()));
        templates.push(tid);
    }
    let mut m = meta(pack, templates.join(","), seed, ids.to_vec());
    m.params.insert("kind".into(), json!(kind));
    m.params.insert("unit".into(), json!(unit));
    Ok(InstructionSample {
        id: sample_id(&pack.scene_id, Task::Measurement, seed),
        task: Task::Measurement,
        media: media_for(pack, &[0]),
        messages,
        answer,
        meta: m,
    })
}

/// Wraps a teacher-written caption into a sample over the given frames.
pub fn gen_scene_caption(
    pack: &ScenePack,
    frames: &[usize],
    caption: &str,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    if let Some(&f) = frames.iter().find(|&&f| f >= pack.frames.len()) {
        return Err(GenError::FrameOutOfRange(f));
    }
    let caption = caption.trim();
    if caption.is_empty() || frames.is_empty() {
        return Err(GenError::Teacher("empty caption".into()));
    }
    let (task, pool) = if frames.len() == 1 {
        (Task::SceneCaptionSingle, &CAPTION_SINGLE)
    } else {
        (Task::SceneCaptionMulti, &CAPTION_MULTI)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tid, phr) = pick(&mut rng, pool);
    let mut m = meta(pack, tid, seed, Vec::new());
    m.params.insert("frames".into(), json!(frames));
    Ok(InstructionSample {
        id: sample_id(&pack.scene_id, task, seed),
        task,
        media: media_for(pack, frames),
        messages: vec![Message::user(phr), Message::assistant(caption)],
        answer: caption.to_string(),
        meta: m,
    })
}
