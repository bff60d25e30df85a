//! Video samples: appearance order, instance counts, distances and
//! egocentric directions across a frame sequence.
//!
//! Objects are referred to by label, so every object named in a question
//! must carry a label that is unique in the scene.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::dataset::{SceneObject, ScenePack};

use super::relation::{egocentric_relation, Egocentric};
use super::text::{pick, plural, VIDEO_COUNT, VIDEO_DIRECTION, VIDEO_DISTANCE, VIDEO_ORDER};
use super::{
    choose_options, fill, find_objects, inline_options, listed_options, media_for, meta, option_answer, sample_id,
    GenError, InstructionSample, Message, Task,
};

fn all_frames(pack: &ScenePack) -> Vec<usize> {
    (0..pack.frames.len()).collect()
}

fn unique_labels<'a>(pack: &'a ScenePack, ids: &[u32]) -> Result<Vec<&'a SceneObject>, GenError> {
    let objs = find_objects(pack, ids)?;
    for o in &objs {
        if pack.objects.iter().filter(|p| p.label == o.label).count() > 1 {
            return Err(GenError::AmbiguousLabel(o.label.clone()));
        }
    }
    Ok(objs)
}

fn sample(
    pack: &ScenePack,
    task: Task,
    template: String,
    seed: u64,
    ids: Vec<u32>,
    question: String,
    answer: String,
) -> InstructionSample {
    InstructionSample {
        id: sample_id(&pack.scene_id, task, seed),
        task,
        media: media_for(pack, &all_frames(pack)),
        messages: vec![Message::user(question), Message::assistant(answer.clone())],
        answer,
        meta: meta(pack, template, seed, ids),
    }
}

/// Order in which objects are first seen. Distractor options are other
/// permutations of the same objects.
pub fn gen_video_order(
    pack: &ScenePack,
    ids: &[u32],
    num_options: usize,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    if ids.len() < 2 {
        return Err(GenError::NotEnoughObjects { need: 2, have: ids.len() });
    }
    let objs = unique_labels(pack, ids)?;
    let mut timed = Vec::with_capacity(objs.len());
    for o in &objs {
        let t = o
            .first_appearance()
            .ok_or(GenError::MissingReference { id: o.id, kind: "appearance" })?;
        timed.push((t, *o));
    }
    timed.sort_by_key(|(t, _)| *t);
    if timed.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(GenError::AppearanceTie);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let correct: Vec<&str> = timed.iter().map(|(_, o)| o.label.as_str()).collect();
    let mut distractors = Vec::new();
    // A few shuffles are enough to find distinct permutations for small k.
    for _ in 0..32 {
        let mut p = correct.clone();
        p.shuffle(&mut rng);
        distractors.push(p.join(", "));
    }
    let (opts, pos) = choose_options(&mut rng, &correct.join(", "), &distractors, num_options);
    let mut asked: Vec<&str> = objs.iter().map(|o| o.label.as_str()).collect();
    asked.shuffle(&mut rng);
    let (tid, phr) = pick(&mut rng, &VIDEO_ORDER);
    let question = fill(phr, &[("objects", &asked.join(", ")), ("options", &listed_options(&opts))])?;
    let mut s = sample(
        pack,
        Task::VideoAppearanceOrder,
        tid,
        seed,
        ids.to_vec(),
        question,
        option_answer(&opts, pos),
    );
    s.meta.params.insert(
        "appearance".into(),
        json!(timed.iter().map(|(t, o)| (o.id, *t)).collect::<Vec<_>>()),
    );
    Ok(s)
}

/// Number of distinct instances of `label` seen in any frame. With
/// `allow_zero` unset a label that never appears is rejected.
pub fn gen_video_count(pack: &ScenePack, label: &str, allow_zero: bool, seed: u64) -> Result<InstructionSample, GenError> {
    let ids: Vec<u32> = pack
        .objects
        .iter()
        .filter(|o| o.label == label && o.in_frames.iter().any(|f| *f))
        .map(|o| o.id)
        .collect();
    if ids.is_empty() && !allow_zero {
        return Err(GenError::NoMatchingObjects(label.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (tid, phr) = pick(&mut rng, &VIDEO_COUNT);
    let question = fill(phr, &[("plural", &plural(label))])?;
    let answer = ids.len().to_string();
    let mut s = sample(pack, Task::VideoCount, tid, seed, ids, question, answer);
    s.meta.params.insert("label".into(), json!(label));
    Ok(s)
}

/// Which candidate is closest to the anchor by center distance.
pub fn gen_video_distance(
    pack: &ScenePack,
    anchor: u32,
    candidates: &[u32],
    tie_tol: f64,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    if candidates.len() < 2 {
        return Err(GenError::NotEnoughObjects { need: 2, have: candidates.len() });
    }
    let a = unique_labels(pack, &[anchor])?[0];
    let cands = unique_labels(pack, candidates)?;
    let mut dist: Vec<(f64, &SceneObject)> = cands
        .iter()
        .map(|c| ((c.bbox.center - a.bbox.center).norm(), *c))
        .collect();
    dist.sort_by(|x, y| x.0.total_cmp(&y.0));
    let gap = dist[1].0 - dist[0].0;
    if gap < tie_tol {
        return Err(GenError::DistanceTie { gap, tol: tie_tol });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = cands.iter().map(|c| c.label.clone()).collect();
    let (opts, pos) = choose_options(&mut rng, &dist[0].1.label, &names, names.len());
    let (tid, phr) = pick(&mut rng, &VIDEO_DISTANCE);
    let question = fill(
        phr,
        &[("objects", &names.join(", ")), ("anchor", &a.label), ("options", &inline_options(&opts))],
    )?;
    let mut ids = vec![anchor];
    ids.extend_from_slice(candidates);
    Ok(sample(pack, Task::VideoObjectDistance, tid, seed, ids, question, option_answer(&opts, pos)))
}

/// Standing at `a` and facing `b`, where is `c`.
pub fn gen_video_direction(
    pack: &ScenePack,
    [a, b, c]: [u32; 3],
    num_options: usize,
    seed: u64,
) -> Result<InstructionSample, GenError> {
    let objs = unique_labels(pack, &[a, b, c])?;
    let (pa, pb, pc) = (&objs[0].bbox.center, &objs[1].bbox.center, &objs[2].bbox.center);
    let dir = egocentric_relation(pa, &(pb - pa), pc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let others: Vec<String> = Egocentric::ALL.iter().map(|e| e.name().to_string()).collect();
    let (opts, pos) = choose_options(&mut rng, dir.name(), &others, num_options);
    let (tid, phr) = pick(&mut rng, &VIDEO_DIRECTION);
    let question = fill(
        phr,
        &[
            ("a", &objs[0].label),
            ("b", &objs[1].label),
            ("c", &objs[2].label),
            ("options", &inline_options(&opts)),
        ],
    )?;
    Ok(sample(pack, Task::VideoObjectDirection, tid, seed, vec![a, b, c], question, option_answer(&opts, pos)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::fixtures::{frame, object, pack};
    use crate::geometry::Pose;
    use proptest::prelude::*;

    fn video(objects: Vec<SceneObject>, frames: usize) -> ScenePack {
        let frames = (0..frames)
            .map(|i| frame(&format!("f{i}.jpg"), Pose::identity()))
            .collect();
        pack(frames, objects)
    }

    fn first_at(id: u32, label: &str, first: usize, frames: usize) -> SceneObject {
        let mut o = object(id, label, [id as f64, 0.0, 3.0], [0.5; 3], frames);
        o.in_frames = (0..frames).map(|i| i >= first).collect();
        o
    }

    fn option_text(s: &InstructionSample) -> &str {
        s.answer.split_once(". ").unwrap().1
    }

    #[test]
    fn order_follows_first_appearance() {
        let p = video(
            vec![first_at(1, "sofa", 9, 10), first_at(2, "lamp", 2, 10), first_at(3, "rug", 5, 10)],
            10,
        );
        let s = gen_video_order(&p, &[1, 2, 3], 4, 0).unwrap();
        assert_eq!(option_text(&s), "lamp, rug, sofa");
        assert_eq!(s.media.len(), 10);
        let q = s.user_turns().next().unwrap();
        assert!(q.contains("\nA. ") && q.contains("\nB. "));
    }

    #[test]
    fn order_tie_is_rejected() {
        let p = video(vec![first_at(1, "sofa", 3, 6), first_at(2, "lamp", 3, 6)], 6);
        assert_eq!(gen_video_order(&p, &[1, 2], 4, 0), Err(GenError::AppearanceTie));
    }

    #[test]
    fn explicit_appearance_wins() {
        let mut a = first_at(1, "sofa", 0, 6);
        a.appearance = Some(4);
        let p = video(vec![a, first_at(2, "lamp", 1, 6)], 6);
        assert_eq!(option_text(&gen_video_order(&p, &[1, 2], 4, 0).unwrap()), "lamp, sofa");
    }

    #[test]
    fn eight_chairs() {
        let mut objs: Vec<SceneObject> = (1..=8).map(|i| first_at(i, "chair", (i as usize) % 4, 4)).collect();
        objs.push(first_at(9, "table", 0, 4));
        let p = video(objs, 4);
        let s = gen_video_count(&p, "chair", false, 0).unwrap();
        assert_eq!(s.answer, "8");
        assert!(s.user_turns().next().unwrap().contains("chairs"));
    }

    #[test]
    fn zero_count_flag() {
        let p = video(vec![first_at(1, "sofa", 0, 2)], 2);
        assert!(matches!(gen_video_count(&p, "chair", false, 0), Err(GenError::NoMatchingObjects(_))));
        assert_eq!(gen_video_count(&p, "chair", true, 0).unwrap().answer, "0");
    }

    #[test]
    fn distance_and_direction() {
        let mut objs = vec![
            object(1, "bed", [0.0, 0.0, 0.0], [1.0; 3], 2),
            object(2, "desk", [0.0, 0.0, 2.0], [1.0; 3], 2),
            object(3, "door", [3.0, 0.0, 0.0], [1.0; 3], 2),
        ];
        objs[1].bbox.center.z = 2.0;
        let p = video(objs, 2);
        let s = gen_video_distance(&p, 1, &[2, 3], 0.1, 0).unwrap();
        assert_eq!(option_text(&s), "desk");
        // Facing +Z from the bed, the door at +X is on the right.
        let s = gen_video_direction(&p, [1, 2, 3], 4, 0).unwrap();
        assert_eq!(option_text(&s), "right");
    }

    #[test]
    fn ambiguous_labels_are_rejected() {
        let p = video(vec![first_at(1, "chair", 0, 2), first_at(2, "chair", 1, 2)], 2);
        assert!(matches!(gen_video_order(&p, &[1, 2], 4, 0), Err(GenError::AmbiguousLabel(_))));
    }

    proptest! {
        #[test]
        fn order_matches_sort_oracle(firsts in proptest::collection::vec(0usize..30, 2..6), seed in any::<u64>()) {
            let labels = ["sofa", "lamp", "rug", "tv", "plant", "desk"];
            let objs: Vec<SceneObject> = firsts.iter().enumerate()
                .map(|(i, f)| first_at(i as u32 + 1, labels[i], *f, 30)).collect();
            let ids: Vec<u32> = (1..=firsts.len() as u32).collect();
            let p = video(objs, 30);
            let mut distinct = firsts.clone();
            distinct.sort();
            distinct.dedup();
            match gen_video_order(&p, &ids, 4, seed) {
                Err(GenError::AppearanceTie) => prop_assert!(distinct.len() < firsts.len()),
                Ok(s) => {
                    let mut idx: Vec<usize> = (0..firsts.len()).collect();
                    idx.sort_by_key(|&i| firsts[i]);
                    let want: Vec<&str> = idx.iter().map(|&i| labels[i]).collect();
                    prop_assert_eq!(option_text(&s), want.join(", "));
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
