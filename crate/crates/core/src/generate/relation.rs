//! Ground-plane directions and camera-motion labels.
//!
//! The ground plane is the frame-1 X–Z plane (Y points down). Bearings are
//! measured clockwise when viewed from above, so with north along +Z east is
//! +X.

use serde::{Deserialize, Serialize};

use crate::geometry::{matrix_to_euler_canonical, Pose, Vec3};

use super::GenError;

const GROUND_EPS: f64 = 1e-9;
/// Angular tolerance, in sectors, for treating a bearing as a boundary.
const BOUNDARY_EPS: f64 = 1e-9;

/// Clockwise bearing of `target` from `origin`, in degrees in `(-180, 180]`,
/// relative to the ground-plane direction `reference`.
pub fn ground_bearing(origin: &Vec3, reference: &Vec3, target: &Vec3) -> Result<f64, GenError> {
    let (nx, nz) = (reference.x, reference.z);
    let norm = nx.hypot(nz);
    if norm < GROUND_EPS {
        return Err(GenError::DegenerateReference);
    }
    let (nx, nz) = (nx / norm, nz / norm);
    let (vx, vz) = (target.x - origin.x, target.z - origin.z);
    if vx.hypot(vz) < GROUND_EPS {
        return Err(GenError::DegenerateTarget);
    }
    // East is north turned a quarter clockwise: (x, z) -> (z, -x).
    let (ex, ez) = (nz, -nx);
    Ok((vx * ex + vz * ez).atan2(vx * nx + vz * nz).to_degrees())
}

/// Index of the 45° sector centered on `bearing`, 0 at the reference.
fn sector(bearing: f64) -> Result<usize, GenError> {
    let s = bearing / 45.0;
    if (s - s.floor() - 0.5).abs() < BOUNDARY_EPS {
        return Err(GenError::BoundaryDirection);
    }
    Ok((s.round() as i64).rem_euclid(8) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Compass {
    North,
    Northeast,
    East,
    Southeast,
    South,
    Southwest,
    West,
    Northwest,
}

impl Compass {
    pub const ALL: [Compass; 8] = [
        Compass::North,
        Compass::Northeast,
        Compass::East,
        Compass::Southeast,
        Compass::South,
        Compass::Southwest,
        Compass::West,
        Compass::Northwest,
    ];

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 8]
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|c| *c == self).expect("listed")
    }

    /// Turns clockwise by `steps` eighths.
    pub fn turn(self, steps: usize) -> Self {
        Self::from_index(self.index() + steps)
    }

    pub fn name(self) -> &'static str {
        match self {
            Compass::North => "north",
            Compass::Northeast => "northeast",
            Compass::East => "east",
            Compass::Southeast => "southeast",
            Compass::South => "south",
            Compass::Southwest => "southwest",
            Compass::West => "west",
            Compass::Northwest => "northwest",
        }
    }
}

/// Direction of `c` seen from `a` when the direction from `a` to `b` is north.
pub fn compass_relation(a: &Vec3, b: &Vec3, c: &Vec3) -> Result<Compass, GenError> {
    let bearing = ground_bearing(a, &(b - a), c)?;
    Ok(Compass::from_index(sector(bearing)?))
}

/// Direction relative to an observer's facing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Egocentric {
    Front,
    FrontRight,
    Right,
    BackRight,
    Back,
    BackLeft,
    Left,
    FrontLeft,
}

impl Egocentric {
    pub const ALL: [Egocentric; 8] = [
        Egocentric::Front,
        Egocentric::FrontRight,
        Egocentric::Right,
        Egocentric::BackRight,
        Egocentric::Back,
        Egocentric::BackLeft,
        Egocentric::Left,
        Egocentric::FrontLeft,
    ];

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 8]
    }

    pub fn name(self) -> &'static str {
        match self {
            Egocentric::Front => "front",
            Egocentric::FrontRight => "front-right",
            Egocentric::Right => "right",
            Egocentric::BackRight => "back-right",
            Egocentric::Back => "back",
            Egocentric::BackLeft => "back-left",
            Egocentric::Left => "left",
            Egocentric::FrontLeft => "front-left",
        }
    }
}

/// Where `target` lies for an observer at `position` facing `facing`.
pub fn egocentric_relation(position: &Vec3, facing: &Vec3, target: &Vec3) -> Result<Egocentric, GenError> {
    let bearing = ground_bearing(position, facing, target)?;
    Ok(Egocentric::from_index(sector(bearing)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionThresholds {
    /// An axis is labeled when its magnitude reaches this fraction of the
    /// largest component.
    pub dominance_ratio: f64,
    pub min_rotation_deg: f64,
    pub min_translation: f64,
}

impl Default for MotionThresholds {
    fn default() -> Self {
        Self {
            dominance_ratio: 0.5,
            min_rotation_deg: 5.0,
            min_translation: 0.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationLabel {
    PanLeft,
    PanRight,
    TiltUp,
    TiltDown,
    RollClockwise,
    RollCounterclockwise,
}

impl RotationLabel {
    pub fn phrase(self) -> &'static str {
        match self {
            RotationLabel::PanLeft => "panning to the left",
            RotationLabel::PanRight => "panning to the right",
            RotationLabel::TiltUp => "tilting upward",
            RotationLabel::TiltDown => "tilting downward",
            RotationLabel::RollClockwise => "rolling clockwise",
            RotationLabel::RollCounterclockwise => "rolling counterclockwise",
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            RotationLabel::PanLeft => RotationLabel::PanRight,
            RotationLabel::PanRight => RotationLabel::PanLeft,
            RotationLabel::TiltUp => RotationLabel::TiltDown,
            RotationLabel::TiltDown => RotationLabel::TiltUp,
            RotationLabel::RollClockwise => RotationLabel::RollCounterclockwise,
            RotationLabel::RollCounterclockwise => RotationLabel::RollClockwise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationLabel {
    Leftward,
    Rightward,
    Upward,
    Downward,
    Forward,
    Backward,
}

impl TranslationLabel {
    pub const ALL: [TranslationLabel; 6] = [
        TranslationLabel::Rightward,
        TranslationLabel::Leftward,
        TranslationLabel::Forward,
        TranslationLabel::Backward,
        TranslationLabel::Upward,
        TranslationLabel::Downward,
    ];

    pub fn word(self) -> &'static str {
        match self {
            TranslationLabel::Leftward => "leftward",
            TranslationLabel::Rightward => "rightward",
            TranslationLabel::Upward => "upward",
            TranslationLabel::Downward => "downward",
            TranslationLabel::Forward => "forward",
            TranslationLabel::Backward => "backward",
        }
    }

    /// 0 for X, 1 for Z, 2 for Y: the order labels are spoken in.
    pub fn axis_rank(self) -> usize {
        match self {
            TranslationLabel::Leftward | TranslationLabel::Rightward => 0,
            TranslationLabel::Forward | TranslationLabel::Backward => 1,
            TranslationLabel::Upward | TranslationLabel::Downward => 2,
        }
    }

    /// `"rightward"`, `"rightward and forward"`, `"leftward, backward and upward"`.
    pub fn phrase(labels: &[TranslationLabel]) -> String {
        let words: Vec<&str> = labels.iter().map(|l| l.word()).collect();
        match words.as_slice() {
            [] => String::new(),
            [one] => one.to_string(),
            [init @ .., last] => format!("{} and {last}", init.join(", ")),
        }
    }
}

/// Motion of the second camera relative to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraMotion {
    pub rotation: Vec<RotationLabel>,
    pub translation: Vec<TranslationLabel>,
    /// Relative `[pitch, yaw, roll]` in degrees.
    pub angles_deg: [f64; 3],
    /// Second camera center in first-camera coordinates, meters.
    pub offset: [f64; 3],
}

fn dominant(values: [f64; 3], ratio: f64, floor: f64) -> [bool; 3] {
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    values.map(|v| v.abs() >= floor && v.abs() >= ratio * max)
}

/// Labels the motion from `first` to `second` (both `frame1_from_camera`).
///
/// Positive yaw turns the optical axis toward +X (pan right), positive pitch
/// toward −Y (tilt up), and positive roll carries +X toward +Y, which reads as
/// clockwise from behind the camera.
pub fn classify_camera_motion(
    first: &Pose,
    second: &Pose,
    th: &MotionThresholds,
) -> Result<CameraMotion, GenError> {
    let rel = first.inverse().compose(second);
    let angles_deg = matrix_to_euler_canonical(rel.rotation()).to_degrees();
    let t = rel.translation();
    let offset = [t.x, t.y, t.z];

    let rot_on = dominant(angles_deg, th.dominance_ratio, th.min_rotation_deg);
    let mut rotation = Vec::new();
    let [pitch, yaw, roll] = angles_deg;
    if rot_on[1] {
        rotation.push(if yaw > 0.0 { RotationLabel::PanRight } else { RotationLabel::PanLeft });
    }
    if rot_on[0] {
        rotation.push(if pitch > 0.0 { RotationLabel::TiltUp } else { RotationLabel::TiltDown });
    }
    if rot_on[2] {
        rotation.push(if roll > 0.0 {
            RotationLabel::RollClockwise
        } else {
            RotationLabel::RollCounterclockwise
        });
    }

    let tr_on = dominant(offset, th.dominance_ratio, th.min_translation);
    let mut translation = Vec::new();
    if tr_on[0] {
        translation.push(if t.x > 0.0 { TranslationLabel::Rightward } else { TranslationLabel::Leftward });
    }
    if tr_on[2] {
        translation.push(if t.z > 0.0 { TranslationLabel::Forward } else { TranslationLabel::Backward });
    }
    if tr_on[1] {
        translation.push(if t.y > 0.0 { TranslationLabel::Downward } else { TranslationLabel::Upward });
    }

    if rotation.is_empty() && translation.is_empty() {
        return Err(GenError::NoSignificantMotion);
    }
    Ok(CameraMotion {
        rotation,
        translation,
        angles_deg,
        offset,
    })
}
