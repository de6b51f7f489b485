//! Shared vocabulary: joints, axes, walking conditions, frames and trials.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Implements `Display`/`FromStr`/serde for a fieldless token enum.
macro_rules! token_enum {
    ($ty:ident, $what:literal, [$($variant:ident => $token:literal),+ $(,)?]) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn token(self) -> &'static str {
                match self {
                    $($ty::$variant => $token),+
                }
            }

            fn valid_tokens() -> String {
                let tokens: Vec<&str> = Self::ALL.iter().map(|v| v.token()).collect();
                format!("{{{}}}", tokens.join(", "))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.token())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($token => Ok($ty::$variant),)+
                    _ => Err(Error::parse(format!(
                        concat!("unknown ", $what, " '{}', expected one of {}"),
                        s,
                        Self::valid_tokens()
                    ))),
                }
            }
        }
    };
}

/// The fifteen tracked skeleton joints, in canonical output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum JointId {
    Head,
    Neck,
    ShoulderLeft,
    ShoulderRight,
    SpineShoulder,
    SpineMid,
    SpineBase,
    HipLeft,
    HipRight,
    KneeLeft,
    KneeRight,
    AnkleLeft,
    AnkleRight,
    FootLeft,
    FootRight,
}

impl JointId {
    pub const COUNT: usize = 15;

    pub const ALL: [JointId; 15] = [
        JointId::Head,
        JointId::Neck,
        JointId::ShoulderLeft,
        JointId::ShoulderRight,
        JointId::SpineShoulder,
        JointId::SpineMid,
        JointId::SpineBase,
        JointId::HipLeft,
        JointId::HipRight,
        JointId::KneeLeft,
        JointId::KneeRight,
        JointId::AnkleLeft,
        JointId::AnkleRight,
        JointId::FootLeft,
        JointId::FootRight,
    ];

    /// Position in the canonical ordering.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn token(self) -> &'static str {
        match self {
            JointId::Head => "head",
            JointId::Neck => "neck",
            JointId::ShoulderLeft => "shoulder_left",
            JointId::ShoulderRight => "shoulder_right",
            JointId::SpineShoulder => "spine_shoulder",
            JointId::SpineMid => "spine_mid",
            JointId::SpineBase => "spine_base",
            JointId::HipLeft => "hip_left",
            JointId::HipRight => "hip_right",
            JointId::KneeLeft => "knee_left",
            JointId::KneeRight => "knee_right",
            JointId::AnkleLeft => "ankle_left",
            JointId::AnkleRight => "ankle_right",
            JointId::FootLeft => "foot_left",
            JointId::FootRight => "foot_right",
        }
    }

    /// Accepts canonical tokens plus the prose forms "left shoulder",
    /// "shoulder spine", "mid spine" and "base spine".
    fn from_alias(s: &str) -> Option<JointId> {
        let normalized = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        if let Some(j) = JointId::ALL.iter().find(|j| j.token() == normalized) {
            return Some(*j);
        }
        let j = match normalized.as_str() {
            "shoulder_spine" => JointId::SpineShoulder,
            "mid_spine" => JointId::SpineMid,
            "base_spine" => JointId::SpineBase,
            other => {
                let (side, part) = other.split_once('_')?;
                let flipped = format!("{part}_{side}");
                return JointId::ALL.iter().copied().find(|j| j.token() == flipped);
            }
        };
        Some(j)
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for JointId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        JointId::from_alias(s).ok_or_else(|| Error::parse(format!("unknown joint '{s}'")))
    }
}

impl Serialize for JointId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.token())
    }
}

impl<'de> Deserialize<'de> for JointId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Camera axes. X runs along the walking direction, Y is vertical and Z is lateral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Axis {
    X,
    #[default]
    Y,
    Z,
}

token_enum!(Axis, "axis", [X => "X", Y => "Y", Z => "Z"]);

impl Axis {
    pub fn semantic_name(self) -> &'static str {
        match self {
            Axis::X => "anteroposterior",
            Axis::Y => "vertical",
            Axis::Z => "mediolateral",
        }
    }

    pub fn from_semantic_name(name: &str) -> Option<Axis> {
        Axis::ALL.iter().copied().find(|a| a.semantic_name() == name)
    }
}

/// Walking condition: normal, knee brace, ankle brace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Nw,
    Kb,
    Ab,
}

token_enum!(Condition, "condition", [Nw => "NW", Kb => "KB", Ab => "AB"]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CameraView {
    Sagittal,
    Frontal,
}

token_enum!(CameraView, "camera", [Sagittal => "sagittal", Frontal => "frontal"]);

/// Per-joint tracking confidence reported by the depth camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TrackState {
    Tracked,
    Inferred,
    NotTracked,
}

token_enum!(TrackState, "state", [
    Tracked => "tracked",
    Inferred => "inferred",
    NotTracked => "not_tracked",
]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Out,
    Back,
}

token_enum!(Direction, "direction", [Out => "out", Back => "back"]);

/// Named joint groups used for profiles and figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum JointGroup {
    Main5,
    Left5,
    Right5,
    #[default]
    All15,
}

token_enum!(JointGroup, "joint group", [
    Main5 => "main5",
    Left5 => "left5",
    Right5 => "right5",
    All15 => "all15",
]);

impl JointGroup {
    pub fn joints(self) -> Vec<JointId> {
        use JointId::*;
        match self {
            JointGroup::Main5 => vec![Head, Neck, SpineShoulder, SpineMid, SpineBase],
            JointGroup::Left5 => vec![ShoulderLeft, HipLeft, KneeLeft, AnkleLeft, FootLeft],
            JointGroup::Right5 => vec![ShoulderRight, HipRight, KneeRight, AnkleRight, FootRight],
            JointGroup::All15 => JointId::ALL.to_vec(),
        }
    }
}

/// Resolve a group token to its ordered joint list.
pub fn joint_group(name: &str) -> Result<Vec<JointId>> {
    Ok(name.parse::<JointGroup>()?.joints())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub state: TrackState,
}

impl JointPosition {
    pub fn new(x: f64, y: f64, z: f64, state: TrackState) -> Self {
        JointPosition { x, y, z, state }
    }

    pub fn coord(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn is_tracked(&self) -> bool {
        self.state != TrackState::NotTracked
    }
}

/// One captured skeleton: all fifteen joints at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_index: u64,
    pub timestamp_ms: u64,
    joints: [JointPosition; JointId::COUNT],
}

impl Frame {
    /// Fails if a tracked or inferred joint carries a non-finite coordinate.
    pub fn new(frame_index: u64, timestamp_ms: u64, joints: [JointPosition; JointId::COUNT]) -> Result<Self> {
        for (joint, p) in JointId::ALL.iter().zip(&joints) {
            if p.is_tracked() && !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::invalid(format!(
                    "frame {frame_index}: non-finite coordinate for {joint}"
                )));
            }
        }
        Ok(Frame {
            frame_index,
            timestamp_ms,
            joints,
        })
    }

    pub fn joint(&self, joint: JointId) -> &JointPosition {
        &self.joints[joint.index()]
    }

    pub fn joints(&self) -> impl Iterator<Item = (JointId, &JointPosition)> {
        JointId::ALL.iter().copied().zip(self.joints.iter())
    }

    pub(crate) fn joint_mut(&mut self, joint: JointId) -> &mut JointPosition {
        &mut self.joints[joint.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrialId {
    pub subject_id: String,
    pub condition: Condition,
    pub camera: CameraView,
    pub trial_index: u32,
}

impl fmt::Display for TrialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/t{}",
            self.subject_id, self.condition, self.camera, self.trial_index
        )
    }
}

pub const DEFAULT_FPS: f64 = 30.0;

/// One recorded out-and-back walk.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub id: TrialId,
    pub fps_nominal: f64,
    frames: Vec<Frame>,
}

impl Trial {
    /// Requires at least two frames with strictly increasing `frame_index`.
    /// Timestamp monotonicity is reported by validation rather than enforced here.
    pub fn new(id: TrialId, fps_nominal: f64, frames: Vec<Frame>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::invalid(format!(
                "trial {id}: needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        if !(fps_nominal > 0.0 && fps_nominal.is_finite()) {
            return Err(Error::invalid(format!("trial {id}: fps_nominal must be > 0")));
        }
        if let Some(w) = frames.windows(2).find(|w| w[1].frame_index <= w[0].frame_index) {
            return Err(Error::invalid(format!(
                "trial {id}: frame_index not increasing at {}",
                w[1].frame_index
            )));
        }
        Ok(Trial {
            id,
            fps_nominal,
            frames,
        })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Position of the frame carrying `frame_index`, if any.
    pub fn position_of(&self, frame_index: u64) -> Option<usize> {
        self.frames
            .binary_search_by_key(&frame_index, |f| f.frame_index)
            .ok()
    }

    /// Same trial with frames in reverse temporal order, renumbered so that
    /// indices and timestamps stay increasing.
    pub fn time_reversed(&self) -> Trial {
        let last = self.frames.last().expect("non-empty");
        let first = &self.frames[0];
        let frames = self
            .frames
            .iter()
            .rev()
            .map(|f| Frame {
                frame_index: first.frame_index + (last.frame_index - f.frame_index),
                timestamp_ms: first.timestamp_ms + (last.timestamp_ms.saturating_sub(f.timestamp_ms)),
                joints: f.joints,
            })
            .collect();
        Trial {
            id: self.id.clone(),
            fps_nominal: self.fps_nominal,
            frames,
        }
    }

    pub(crate) fn frames_mut(&mut self) -> &mut [Frame] {
        &mut self.frames
    }
}

/// Inclusive frame-index range of one straight-line pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkSegment {
    pub direction: Direction,
    pub start_frame: u64,
    pub end_frame: u64,
}

impl WalkSegment {
    pub fn new(direction: Direction, start_frame: u64, end_frame: u64) -> Result<Self> {
        if start_frame >= end_frame {
            return Err(Error::invalid(format!(
                "{direction} segment: start {start_frame} must precede end {end_frame}"
            )));
        }
        Ok(WalkSegment {
            direction,
            start_frame,
            end_frame,
        })
    }
}

/// One joint's coordinate sequence on one axis, gap-free.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSeries<T> {
    pub joint: JointId,
    pub axis: Axis,
    pub fps: f64,
    values: Vec<T>,
    interpolated: Vec<bool>,
    /// Index in the source sequence of the first retained sample.
    pub source_offset: usize,
}

impl<T: Real> JointSeries<T> {
    pub fn new(joint: JointId, axis: Axis, fps: f64, values: Vec<T>) -> Result<Self> {
        let n = values.len();
        Self::with_mask(joint, axis, fps, values, vec![false; n], 0)
    }

    pub(crate) fn with_mask(
        joint: JointId,
        axis: Axis,
        fps: f64,
        values: Vec<T>,
        interpolated: Vec<bool>,
        source_offset: usize,
    ) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain(format!(
                "{joint}/{axis}: series needs at least 2 samples, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "{joint}/{axis}: non-finite value at index {i}"
            )));
        }
        debug_assert_eq!(values.len(), interpolated.len());
        Ok(JointSeries {
            joint,
            axis,
            fps,
            values,
            interpolated,
            source_offset,
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Which samples were filled by interpolation.
    pub fn interpolated_mask(&self) -> &[bool] {
        &self.interpolated
    }

    pub fn interpolated_fraction(&self) -> f64 {
        let filled = self.interpolated.iter().filter(|&&b| b).count();
        filled as f64 / self.values.len() as f64
    }

    /// Same metadata, new values of equal length.
    pub fn map_values(&self, values: Vec<T>) -> Result<Self> {
        assert_eq!(values.len(), self.values.len());
        Self::with_mask(
            self.joint,
            self.axis,
            self.fps,
            values,
            self.interpolated.clone(),
            self.source_offset,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_match_listed_order() {
        use JointId::*;
        assert_eq!(
            joint_group("main5").unwrap(),
            vec![Head, Neck, SpineShoulder, SpineMid, SpineBase]
        );
        assert_eq!(
            joint_group("right5").unwrap(),
            vec![ShoulderRight, HipRight, KneeRight, AnkleRight, FootRight]
        );
        assert_eq!(joint_group("all15").unwrap(), JointId::ALL.to_vec());
    }

    #[test]
    fn unknown_group_lists_valid_tokens() {
        let err = joint_group("center3").unwrap_err().to_string();
        for token in ["main5", "left5", "right5", "all15"] {
            assert!(err.contains(token), "{err}");
        }
    }

    #[test]
    fn groups_partition_all_joints() {
        let mut union: Vec<JointId> = [JointGroup::Main5, JointGroup::Left5, JointGroup::Right5]
            .iter()
            .flat_map(|g| g.joints())
            .collect();
        union.sort();
        let before = union.len();
        union.dedup();
        assert_eq!(before, union.len(), "groups overlap");
        assert_eq!(union, JointId::ALL.to_vec());
    }

    #[test]
    fn joint_tokens_round_trip() {
        for j in JointId::ALL {
            assert_eq!(j.token().parse::<JointId>().unwrap(), j);
            assert_eq!(j.index(), JointId::ALL.iter().position(|&k| k == j).unwrap());
        }
    }

    #[test]
    fn prose_aliases() {
        assert_eq!("left shoulder".parse::<JointId>().unwrap(), JointId::ShoulderLeft);
        assert_eq!("Right Ankle".parse::<JointId>().unwrap(), JointId::AnkleRight);
        assert_eq!(
            "shoulder spine".parse::<JointId>().unwrap(),
            JointId::SpineShoulder
        );
        assert_eq!("base spine".parse::<JointId>().unwrap(), JointId::SpineBase);
        assert_eq!("mid spine".parse::<JointId>().unwrap(), JointId::SpineMid);
        assert!("skull".parse::<JointId>().is_err());
        assert!("left skull".parse::<JointId>().is_err());
    }

    #[test]
    fn axis_semantics_are_bijective() {
        for a in Axis::ALL {
            assert_eq!(Axis::from_semantic_name(a.semantic_name()), Some(*a));
            assert_eq!(a.token().parse::<Axis>().unwrap(), *a);
        }
        assert_eq!(Axis::Y.semantic_name(), "vertical");
    }

    #[test]
    fn condition_and_camera_tokens() {
        assert_eq!(Condition::ALL.len(), 3);
        assert_eq!(CameraView::ALL.len(), 2);
        assert_eq!(TrackState::ALL.len(), 3);
        for c in Condition::ALL {
            assert_eq!(c.to_string().parse::<Condition>().unwrap(), *c);
        }
        let err = "walker".parse::<Condition>().unwrap_err().to_string();
        assert!(err.contains("{NW, KB, AB}"), "{err}");
    }

    #[test]
    fn series_rejects_short_or_nonfinite() {
        assert!(JointSeries::new(JointId::Head, Axis::Y, 30.0, vec![1.0_f64]).is_err());
        assert!(JointSeries::new(JointId::Head, Axis::Y, 30.0, vec![1.0_f64, f64::NAN]).is_err());
        let s = JointSeries::new(JointId::Head, Axis::Y, 30.0, vec![1.0_f32, 2.0]).unwrap();
        assert_eq!(s.interpolated_fraction(), 0.0);
    }
}
