//! Keypoint data model and the NDJSON frame wire format.
//!
//! A frame carries one person's 18 keypoints in COCO order with the Neck
//! slot included. Undetected joints travel on the wire as `[-1,-1]` and are
//! held in memory as absent keypoints that never contribute coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of keypoints in a frame.
pub const NUM_KEYPOINTS: usize = 18;

/// Wire encoding of an undetected keypoint.
pub const SENTINEL: [f64; 2] = [-1.0, -1.0];

/// Named joints, indexed in wire order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Joint {
    Nose = 0,
    Neck = 1,
    RShoulder = 2,
    RElbow = 3,
    RWrist = 4,
    LShoulder = 5,
    LElbow = 6,
    LWrist = 7,
    RHip = 8,
    RKnee = 9,
    RAnkle = 10,
    LHip = 11,
    LKnee = 12,
    LAnkle = 13,
    REye = 14,
    LEye = 15,
    REar = 16,
    LEar = 17,
}

impl Joint {
    pub const ALL: [Joint; NUM_KEYPOINTS] = [
        Joint::Nose,
        Joint::Neck,
        Joint::RShoulder,
        Joint::RElbow,
        Joint::RWrist,
        Joint::LShoulder,
        Joint::LElbow,
        Joint::LWrist,
        Joint::RHip,
        Joint::RKnee,
        Joint::RAnkle,
        Joint::LHip,
        Joint::LKnee,
        Joint::LAnkle,
        Joint::REye,
        Joint::LEye,
        Joint::REar,
        Joint::LEar,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Joint::Nose => "Nose",
            Joint::Neck => "Neck",
            Joint::RShoulder => "RShoulder",
            Joint::RElbow => "RElbow",
            Joint::RWrist => "RWrist",
            Joint::LShoulder => "LShoulder",
            Joint::LElbow => "LElbow",
            Joint::LWrist => "LWrist",
            Joint::RHip => "RHip",
            Joint::RKnee => "RKnee",
            Joint::RAnkle => "RAnkle",
            Joint::LHip => "LHip",
            Joint::LKnee => "LKnee",
            Joint::LAnkle => "LAnkle",
            Joint::REye => "REye",
            Joint::LEye => "LEye",
            Joint::REar => "REar",
            Joint::LEar => "LEar",
        }
    }

    /// The joint on the opposite side of the body; midline joints map to
    /// themselves.
    pub fn mirrored(self) -> Joint {
        match self {
            Joint::Nose => Joint::Nose,
            Joint::Neck => Joint::Neck,
            Joint::RShoulder => Joint::LShoulder,
            Joint::RElbow => Joint::LElbow,
            Joint::RWrist => Joint::LWrist,
            Joint::LShoulder => Joint::RShoulder,
            Joint::LElbow => Joint::RElbow,
            Joint::LWrist => Joint::RWrist,
            Joint::RHip => Joint::LHip,
            Joint::RKnee => Joint::LKnee,
            Joint::RAnkle => Joint::LAnkle,
            Joint::LHip => Joint::RHip,
            Joint::LKnee => Joint::RKnee,
            Joint::LAnkle => Joint::RAnkle,
            Joint::REye => Joint::LEye,
            Joint::LEye => Joint::REye,
            Joint::REar => Joint::LEar,
            Joint::LEar => Joint::REar,
        }
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A 2D image-space keypoint. Absent keypoints carry no usable coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    x: f64,
    y: f64,
    present: bool,
}

impl Keypoint {
    pub const ABSENT: Keypoint = Keypoint {
        x: SENTINEL[0],
        y: SENTINEL[1],
        present: false,
    };

    pub fn new(x: f64, y: f64) -> Self {
        Keypoint { x, y, present: true }
    }

    /// Interprets a wire pair; the exact sentinel becomes an absent keypoint.
    pub fn from_wire(pair: [f64; 2]) -> Self {
        if pair == SENTINEL {
            Keypoint::ABSENT
        } else {
            Keypoint::new(pair[0], pair[1])
        }
    }

    pub fn to_wire(self) -> [f64; 2] {
        match self.coords() {
            Some((x, y)) => [x, y],
            None => SENTINEL,
        }
    }

    pub fn is_present(self) -> bool {
        self.present
    }

    pub fn coords(self) -> Option<(f64, f64)> {
        self.present.then_some((self.x, self.y))
    }

    /// Coordinate-wise mean of two present keypoints.
    pub fn midpoint(a: Keypoint, b: Keypoint) -> Keypoint {
        match (a.coords(), b.coords()) {
            (Some((ax, ay)), Some((bx, by))) => Keypoint::new((ax + bx) / 2.0, (ay + by) / 2.0),
            _ => Keypoint::ABSENT,
        }
    }

    /// Applies `f` to the coordinates of a present keypoint.
    pub fn map(self, f: impl FnOnce(f64, f64) -> (f64, f64)) -> Keypoint {
        match self.coords() {
            Some((x, y)) => {
                let (nx, ny) = f(x, y);
                Keypoint::new(nx, ny)
            }
            None => Keypoint::ABSENT,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("expected {NUM_KEYPOINTS} points, got {0}")]
    WrongArity(usize),
    #[error("non-finite coordinate at point {index}")]
    NonFiniteCoordinate { index: usize },
}

/// One person's keypoints at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointFrame {
    pub frame_id: u64,
    pub timestamp_ms: u64,
    pub person_id: u32,
    points: [Keypoint; NUM_KEYPOINTS],
}

impl KeypointFrame {
    pub fn new(frame_id: u64, timestamp_ms: u64, person_id: u32, points: [Keypoint; NUM_KEYPOINTS]) -> Self {
        KeypointFrame {
            frame_id,
            timestamp_ms,
            person_id,
            points,
        }
    }

    /// Builds a frame from wire pairs, validating arity and finiteness.
    pub fn from_wire_points(
        frame_id: u64,
        timestamp_ms: u64,
        person_id: u32,
        pairs: &[[f64; 2]],
    ) -> Result<Self, FrameError> {
        if pairs.len() != NUM_KEYPOINTS {
            return Err(FrameError::WrongArity(pairs.len()));
        }
        let mut points = [Keypoint::ABSENT; NUM_KEYPOINTS];
        for (index, (slot, pair)) in points.iter_mut().zip(pairs).enumerate() {
            if !pair[0].is_finite() || !pair[1].is_finite() {
                return Err(FrameError::NonFiniteCoordinate { index });
            }
            *slot = Keypoint::from_wire(*pair);
        }
        Ok(KeypointFrame::new(frame_id, timestamp_ms, person_id, points))
    }

    pub fn absent(frame_id: u64, timestamp_ms: u64, person_id: u32) -> Self {
        KeypointFrame::new(frame_id, timestamp_ms, person_id, [Keypoint::ABSENT; NUM_KEYPOINTS])
    }

    pub fn points(&self) -> &[Keypoint; NUM_KEYPOINTS] {
        &self.points
    }

    pub fn get(&self, joint: Joint) -> Keypoint {
        self.points[joint.index()]
    }

    pub fn set(&mut self, joint: Joint, point: Keypoint) {
        self.points[joint.index()] = point;
    }

    /// Returns a copy with `f` applied to every present keypoint.
    pub fn map_points(&self, mut f: impl FnMut(f64, f64) -> (f64, f64)) -> KeypointFrame {
        let mut out = self.clone();
        for p in out.points.iter_mut() {
            *p = p.map(&mut f);
        }
        out
    }

    pub fn to_record(&self) -> WireRecord {
        WireRecord {
            frame_id: self.frame_id,
            ts_ms: self.timestamp_ms,
            person_id: self.person_id,
            points: self.points.iter().map(|p| p.to_wire()).collect(),
            label: None,
        }
    }

    /// Serializes to one NDJSON line (without the trailing newline).
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_record()).expect("wire record serializes")
    }
}

/// Raw shape of one NDJSON record. `label` is only present in labeled
/// dataset files and is ignored by the streaming path.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WireRecord {
    pub frame_id: u64,
    pub ts_ms: u64,
    pub person_id: u32,
    pub points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

impl WireRecord {
    pub fn into_frame(self) -> Result<KeypointFrame, FrameError> {
        KeypointFrame::from_wire_points(self.frame_id, self.ts_ms, self.person_id, &self.points)
    }
}

pub fn parse_record(line: &str) -> Result<WireRecord, FrameError> {
    serde_json::from_str(line.trim()).map_err(|e| FrameError::MalformedRecord(e.to_string()))
}

/// Parses one NDJSON wire line into a validated frame.
pub fn parse_frame(line: &str) -> Result<KeypointFrame, FrameError> {
    parse_record(line)?.into_frame()
}

/// The Neck keypoint: upstream value if supplied, otherwise the shoulder
/// midpoint.
pub fn derive_neck(frame: &KeypointFrame) -> Keypoint {
    let neck = frame.get(Joint::Neck);
    if neck.is_present() {
        return neck;
    }
    Keypoint::midpoint(frame.get(Joint::RShoulder), frame.get(Joint::LShoulder))
}

/// The Core joint: midpoint of the two hips.
pub fn derive_core(frame: &KeypointFrame) -> Keypoint {
    Keypoint::midpoint(frame.get(Joint::RHip), frame.get(Joint::LHip))
}
