//! Placeholder filling and question phrasing pools.
//!
//! A placeholder is `{name}` with `name` made of lowercase letters, digits
//! and underscores. `{{` and `}}` render as single braces; any other brace is
//! literal text.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::GenError;

enum Piece<'a> {
    Text(&'a str),
    Brace(char),
    Slot(&'a str),
}

fn is_name(s: &str) -> bool {
    !s.is_empty()
        && s.bytes().next().is_some_and(|b| b.is_ascii_lowercase() || b == b'_')
        && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn pieces(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let bytes = template.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let doubled = i + 1 < bytes.len() && bytes[i + 1] == b;
        if (b == b'{' || b == b'}') && doubled {
            out.push(Piece::Text(&template[start..i]));
            out.push(Piece::Brace(b as char));
            i += 2;
            start = i;
            continue;
        }
        if b == b'{' {
            if let Some(len) = template[i + 1..].find('}') {
                let name = &template[i + 1..i + 1 + len];
                if is_name(name) {
                    out.push(Piece::Text(&template[start..i]));
                    out.push(Piece::Slot(name));
                    i += len + 2;
                    start = i;
                    continue;
                }
            }
        }
        i += 1;
    }
    out.push(Piece::Text(&template[start..]));
    out
}

/// Placeholder names in order of appearance, duplicates included.
pub fn placeholders(template: &str) -> Vec<String> {
    pieces(template)
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(n) => Some(n.to_string()),
            _ => None,
        })
        .collect()
}

/// Whether unfilled placeholders remain.
pub fn has_placeholder(text: &str) -> bool {
    !placeholders(text).is_empty()
}

/// Substitutes every placeholder in one pass; substituted values are never
/// re-scanned. A missing or empty value is an error.
pub fn fill(template: &str, values: &[(&str, &str)]) -> Result<String, GenError> {
    let mut out = String::with_capacity(template.len());
    for p in pieces(template) {
        match p {
            Piece::Text(t) => out.push_str(t),
            Piece::Brace(c) => out.push(c),
            Piece::Slot(name) => match values.iter().find(|(k, _)| *k == name) {
                Some((_, v)) if !v.trim().is_empty() => out.push_str(v),
                _ => return Err(GenError::MissingPlaceholder(name.to_string())),
            },
        }
    }
    Ok(out)
}

/// Picks a phrasing from a pool; returns `(template id, text)`.
pub(crate) fn pick(rng: &mut ChaCha8Rng, pool: &'static Pool) -> (String, &'static str) {
    let i = rng.random_range(0..pool.phrasings.len());
    (format!("{}#{i}", pool.id), pool.phrasings[i])
}

pub(crate) struct Pool {
    pub id: &'static str,
    pub phrasings: &'static [&'static str],
}

macro_rules! pool {
    ($name:ident, $id:literal, [$($p:literal),+ $(,)?]) => {
        pub(crate) static $name: Pool = Pool { id: $id, phrasings: &[$($p),+] };
    };
}

pool!(DEPTH_TEXT_NEAR, "depth_text_near", [
    "Tell me the depth relationship of the objects of {objects}, listing them from near to far.",
    "Order the objects {objects} from the closest to the farthest from the camera.",
    "Sort {objects} by their distance to the camera, nearest first.",
]);
pool!(DEPTH_TEXT_FAR, "depth_text_far", [
    "Tell me the depth relationship of the objects of {objects}, listing them from far to near.",
    "Order the objects {objects} from the farthest to the closest to the camera.",
    "Sort {objects} by their distance to the camera, farthest first.",
]);
pool!(DEPTH_MARKER_NEAR, "depth_marker_near", [
    "There are several boxes in the image: {objects}. Each box represents an object. Present the object represented by these boxes in an order that goes from close to far and give their names.",
    "The image is marked with {objects}. Each mark stands for an object. List the marked objects from the nearest to the farthest and name them.",
    "Each of {objects} in the image points to an object. Rank these objects from close to far and give their names.",
]);
pool!(DEPTH_MARKER_FAR, "depth_marker_far", [
    "There are several boxes in the image: {objects}. Each box represents an object. Present the object represented by these boxes in an order that goes from far to close and give their names.",
    "The image is marked with {objects}. Each mark stands for an object. List the marked objects from the farthest to the nearest and name them.",
    "Each of {objects} in the image points to an object. Rank these objects from far to close and give their names.",
]);
pool!(DEPTH_POINT_NEAR, "depth_point_near", [
    "The image contains the points {objects}. Each point lies on an object. Order the objects from the closest to the farthest and give their names.",
    "Consider the pixel locations {objects}. Sort the objects at these points from near to far and name them.",
    "Points {objects} each mark an object in the image. Which order do they take from the nearest to the farthest? Give their names.",
]);
pool!(DEPTH_POINT_FAR, "depth_point_far", [
    "The image contains the points {objects}. Each point lies on an object. Order the objects from the farthest to the closest and give their names.",
    "Consider the pixel locations {objects}. Sort the objects at these points from far to near and name them.",
    "Points {objects} each mark an object in the image. Which order do they take from the farthest to the nearest? Give their names.",
]);
pool!(DEPTH_BOX_NEAR, "depth_box2d_near", [
    "You are given several 2D bounding boxes in the image:\n{objects}\nArrange the object represented by these boxes from the nearest to the farthest based on their depth relationship and give their names. Output the sorted bboxes and labels using JSON format.",
    "The following 2D boxes mark objects in the image:\n{objects}\nSort them from close to far and output the sorted bboxes with their labels in JSON format.",
    "Given these 2D bounding boxes:\n{objects}\nOrder the boxed objects by depth, nearest first, and return the bboxes and labels as JSON.",
]);
pool!(DEPTH_BOX_FAR, "depth_box2d_far", [
    "You are given several 2D bounding boxes in the image:\n{objects}\nArrange the object represented by these boxes from the farthest to the nearest based on their depth relationship and give their names. Output the sorted bboxes and labels using JSON format.",
    "The following 2D boxes mark objects in the image:\n{objects}\nSort them from far to close and output the sorted bboxes with their labels in JSON format.",
    "Given these 2D bounding boxes:\n{objects}\nOrder the boxed objects by depth, farthest first, and return the bboxes and labels as JSON.",
]);
pool!(DEPTH_POINT_COMPARE, "depth_point_compare", [
    "The image contains point-A at {a} and point-B at {b}. Please decide which point is closer to the camera.",
    "Two pixels are marked in the image: point-A at {a} and point-B at {b}. Which one is nearer to the camera?",
    "Between point-A at {a} and point-B at {b}, which point has the smaller depth?",
]);
pool!(DISTANCE_CLOSEST, "distance_closest", [
    "Considering the positions, which object ({candidates}) do you think is closest to the {anchor}?",
    "Estimate the real distances and identify which object ({candidates}) is closest to the {anchor}.",
    "Which of {candidates} is nearest to the {anchor}?",
]);
pool!(DISTANCE_FARTHEST, "distance_farthest", [
    "Considering the positions, which object ({candidates}) do you think is farthest from the {anchor}?",
    "Estimate the real distances and identify which object ({candidates}) is farthest from the {anchor}.",
    "Which of {candidates} is the most distant from the {anchor}?",
]);
pool!(DETECT, "detect", [
    "Detect the 3D bounding boxes of {label}.",
    "Find every {label} in the image and output its 3D bounding box.",
    "Locate all instances of {label} and give their 3D bounding boxes.",
]);
pool!(GROUND, "ground", [
    "Which object is enclosed by the 3D bounding box {box}? Answer with its name.",
    "Name the object located at the 3D bounding box {box}.",
    "What object does the 3D bounding box {box} refer to?",
]);
pool!(MEASURE_HEIGHT, "measure_height", [
    "Could you provide the height of the {object}? Specify the measurement in {unit}.",
    "How tall is the {object}? Give the answer in {unit}.",
    "What is the height of the {object} in {unit}?",
]);
pool!(MEASURE_MAX, "measure_max_dim", [
    "What is the length of the largest dimension (length, width, or height) of the {object} in {unit}?",
    "What is the length of the dimension with the maximum value (length, width, or height) of the {object} in {unit}?",
    "How long is the longest side (length, width, or height) of the {object}, in {unit}?",
]);
pool!(CAPTION_SINGLE, "caption_single", [
    "Analyze the spatial organization and positional relationship in this image.",
    "Describe the layout of the objects in this image and how they relate to each other in space.",
    "Give a spatial description of this scene from the camera's viewpoint.",
]);
pool!(CAPTION_MULTI, "caption_multi", [
    "The observer's line of sight is preserved as images are captured one by one. Describe these two frames in detail.",
    "These frames were taken in sequence by a moving camera. Describe the scene they capture and how the view changes.",
    "Describe the scene shown across these images, noting what stays in view and what changes.",
]);
pool!(CORRESPONDENCE, "correspondence", [
    "The first image shows a point at {point}. After adjusting the camera or lighting, the second image presents several points: {candidates}. Which matches the original? Options:\n{options}",
    "A point is marked at {point} in the first image. The second image, taken from another viewpoint, marks the points {candidates}. Which of them shows the same spot? Options:\n{options}",
    "Find the point in the second image that corresponds to {point} in the first image. Candidates are {candidates}. Options:\n{options}",
]);
pool!(OBJREL_OBJECT, "objrel_object", [
    "If the {b} is north of the {a}, what direction is the {c} from the {a}? Options: {options}",
    "Suppose the {b} lies due north of the {a}. In which direction is the {c} relative to the {a}? Options: {options}",
    "Taking the direction from the {a} to the {b} as north, where is the {c} located with respect to the {a}? Options: {options}",
]);
pool!(OBJREL_CAMERA, "objrel_camera", [
    "If, from the camera position of the {a_image} image, the direction toward the {b} (visible in the {b_image} image) is north, then in which direction does the {c} (visible in the {c_image} image) lie relative to the {a_image} image's camera? Options: {options}",
    "Standing at the camera of the {a_image} image, take the direction toward the {b} (seen in the {b_image} image) as north. Which direction is the {c} (seen in the {c_image} image) from that camera? Options: {options}",
    "Let north point from the {a_image} image's camera toward the {b} (in the {b_image} image). In which direction from that camera is the {c} (in the {c_image} image)? Options: {options}",
]);
pool!(OBJREL_DISTANCE, "objrel_distance", [
    "Which is closer to the {a}: the {b} or the {c}?",
    "Between the {b} and the {c}, which one is nearer to the {a}?",
    "Is the {b} or the {c} at a shorter distance from the {a}?",
]);
pool!(CAMCAM_POSITION, "camcam_position", [
    "Images are shot one after another from a first-person perspective. When positioned at the second photo spot, how is the first camera placed relative to me? Options: {options}",
    "The two frames were captured in sequence from a first-person view. Standing where the second photo was taken, where is the first camera located relative to me? Options: {options}",
    "From the viewpoint of the second image, in which direction does the position of the first camera lie? Options: {options}",
]);
pool!(CAMCAM_FACING, "camcam_facing", [
    "The frames are acquired in a continuous sequence from a first-person perspective. If the first picture was taken with the camera facing {facing}, what is the direction for the second picture? Options: {options}",
    "Two pictures are taken in a row from a first-person view. The camera faces {facing} in the first one. Which way does it face in the second? Options: {options}",
    "Assume the first image was captured while facing {facing}. In which direction is the camera facing when the second image is captured? Options: {options}",
]);
pool!(MOTION_TRANSLATION, "motion_translation", [
    "The frames are captured in a continuous manner from a first-person perspective. You are to determine the main direction in which the camera is translated, disregarding small shakes or jitters and concentrating on the overall intentional movement. Which way is the camera's perspective moving? Options: {options}",
    "You take two consecutive photos from a first-person perspective. How does the camera move in space? Options: {options}",
    "Between the first and the second image, in which direction does the camera travel? Options: {options}",
]);
pool!(MOTION_PAN, "motion_pan", [
    "The visual narrative unfolds through a series of images, all from a first-person angle. If we're only considering horizontal rotation, does the camera pan left or right from image one to image two? Options: {options}",
    "Two consecutive photos show a scene from a first-person view. Considering only horizontal rotation, does the camera pan to the right or to the left from the first photo to the second? Options: {options}",
    "Looking only at the horizontal turn of the camera between the two images, which way does it pan? Options: {options}",
]);
pool!(MOTION_TILT, "motion_tilt", [
    "The visual narrative unfolds through a series of images, all from a first-person angle. If we're only considering vertical rotation, does the camera tilt up or down from image one to image two? Options: {options}",
    "Two consecutive photos show a scene from a first-person view. Considering only vertical rotation, does the camera tilt upward or downward from the first photo to the second? Options: {options}",
    "Looking only at the up and down rotation of the camera between the two images, which way does it tilt? Options: {options}",
]);
pool!(MOTION_ROLL, "motion_roll", [
    "The visual narrative unfolds through a series of images, all from a first-person angle. If we're only considering rotation around the viewing direction, does the camera roll clockwise or counterclockwise from image one to image two? Options: {options}",
    "Two consecutive photos show a scene from a first-person view. Considering only rotation about the line of sight, does the camera roll clockwise or counterclockwise? Options: {options}",
    "Looking only at how the camera turns around its viewing axis between the two images, which way does it roll? Options: {options}",
]);
pool!(VIDEO_ORDER, "video_order", [
    "Provide the appearance order for the initial sighting of these objects within the video: {objects}.\nOptions:\n{options}",
    "Arrange the given objects based on the timestamp of their first appearance in the video: {objects}.\nOptions:\n{options}",
    "In which order do these objects first show up in the video: {objects}?\nOptions:\n{options}",
]);
pool!(VIDEO_COUNT, "video_count", [
    "How many {plural} can you spot in this video?",
    "How many {plural} show up in the video?",
    "Count the {plural} that appear in the video. How many are there?",
]);
pool!(VIDEO_DISTANCE, "video_distance", [
    "During the course of this video, which of the objects {objects} is closest to the {anchor}? Options: {options}",
    "Across the whole video, which object among {objects} is nearest to the {anchor}? Options: {options}",
    "Considering the full video, which of {objects} lies closest to the {anchor}? Options: {options}",
]);
pool!(VIDEO_DIRECTION, "video_direction", [
    "Consider the scene in the video. You are positioned at {a}, with your gaze fixed on {b}. In which direction is {c}? Options: {options}",
    "Assuming you are at {a} and looking at {b}, determine the location of {c} relative to you. Options: {options}",
    "Imagine standing at {a} while facing {b}. Where is {c} relative to you? Options: {options}",
]);

#[cfg(test)]
pub(crate) static ALL_POOLS: &[&Pool] = &[
    &DEPTH_TEXT_NEAR,
    &DEPTH_TEXT_FAR,
    &DEPTH_MARKER_NEAR,
    &DEPTH_MARKER_FAR,
    &DEPTH_POINT_NEAR,
    &DEPTH_POINT_FAR,
    &DEPTH_BOX_NEAR,
    &DEPTH_BOX_FAR,
    &DEPTH_POINT_COMPARE,
    &DISTANCE_CLOSEST,
    &DISTANCE_FARTHEST,
    &DETECT,
    &GROUND,
    &MEASURE_HEIGHT,
    &MEASURE_MAX,
    &CAPTION_SINGLE,
    &CAPTION_MULTI,
    &CORRESPONDENCE,
    &OBJREL_OBJECT,
    &OBJREL_CAMERA,
    &OBJREL_DISTANCE,
    &CAMCAM_POSITION,
    &CAMCAM_FACING,
    &MOTION_TRANSLATION,
    &MOTION_PAN,
    &MOTION_TILT,
    &MOTION_ROLL,
    &VIDEO_ORDER,
    &VIDEO_COUNT,
    &VIDEO_DISTANCE,
    &VIDEO_DIRECTION,
];

/// English plural for count questions.
pub(crate) fn plural(label: &str) -> String {
    let consonant_y = label.len() > 1
        && label.ends_with('y')
        && !matches!(label.as_bytes()[label.len() - 2], b'a' | b'e' | b'i' | b'o' | b'u');
    if consonant_y {
        format!("{}ies", &label[..label.len() - 1])
    } else if ["s", "x", "z", "ch", "sh"].iter().any(|s| label.ends_with(s)) {
        format!("{label}es")
    } else {
        format!("{label}s")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn fills_named_slots_only() {
        let out = fill("a {x} {{y}} {not a slot} {", &[("x", "1")]).unwrap();
        assert_eq!(out, "a 1 {y} {not a slot} {");
    }

    #[test]
    fn values_are_not_rescanned() {
        let out = fill("{a}", &[("a", "{b}")]).unwrap();
        assert_eq!(out, "{b}");
    }

    #[test]
    fn missing_or_empty_value_fails() {
        assert_eq!(fill("{a}", &[]), Err(GenError::MissingPlaceholder("a".into())));
        assert_eq!(fill("{a}", &[("a", "  ")]), Err(GenError::MissingPlaceholder("a".into())));
    }

    #[test]
    fn placeholder_listing() {
        assert_eq!(placeholders("{a} {B} {c_1} {{d}}"), ["a", "c_1"]);
        assert!(!has_placeholder("{\n 'question': q\n}"));
    }

    #[test]
    fn pools_are_well_formed() {
        let mut ids = BTreeSet::new();
        for p in ALL_POOLS {
            assert!(p.phrasings.len() >= 3, "{}", p.id);
            assert!(ids.insert(p.id), "duplicate pool id {}", p.id);
            let slots: BTreeSet<_> = placeholders(p.phrasings[0]).into_iter().collect();
            for ph in p.phrasings {
                let s: BTreeSet<_> = placeholders(ph).into_iter().collect();
                assert_eq!(s, slots, "{} phrasings disagree on slots", p.id);
            }
        }
    }

    #[test]
    fn plurals() {
        assert_eq!(plural("chair"), "chairs");
        assert_eq!(plural("box"), "boxes");
        assert_eq!(plural("bench"), "benches");
        assert_eq!(plural("library"), "libraries");
        assert_eq!(plural("toy"), "toys");
    }
}
