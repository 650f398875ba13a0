//! Angular pose encoding.
//!
//! Each frame maps to 15 joint angles (degrees). An angle is computed at the
//! middle joint of a triple from the dot product of the two limb vectors.
//! Entries that cannot be computed are masked invalid rather than erroring.

use std::fmt;

use crate::skeleton::{derive_core, derive_neck, Joint, Keypoint, KeypointFrame};

pub const NUM_FEATURES: usize = 15;

/// A joint addressable by an angle triple: any frame keypoint or the derived
/// Core (hip midpoint).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointRef {
    Point(Joint),
    Core,
}

impl JointRef {
    pub fn name(self) -> &'static str {
        match self {
            JointRef::Point(j) => j.name(),
            JointRef::Core => "Core",
        }
    }

    pub fn mirrored(self) -> JointRef {
        match self {
            JointRef::Point(j) => JointRef::Point(j.mirrored()),
            JointRef::Core => JointRef::Core,
        }
    }
}

/// Angle measured at `vertex` between the rays towards `a` and `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AngleTriple {
    pub a: JointRef,
    pub vertex: JointRef,
    pub c: JointRef,
}

impl AngleTriple {
    const fn new(a: JointRef, vertex: JointRef, c: JointRef) -> Self {
        AngleTriple { a, vertex, c }
    }

    pub fn is_distinct(&self) -> bool {
        self.a != self.vertex && self.vertex != self.c && self.a != self.c
    }
}

impl fmt::Display for AngleTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.a.name(), self.vertex.name(), self.c.name())
    }
}

/// The ordered feature table. Its order is the feature identity of every
/// trained model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingSpec {
    triples: [AngleTriple; NUM_FEATURES],
}

impl EncodingSpec {
    pub fn triples(&self) -> &[AngleTriple; NUM_FEATURES] {
        &self.triples
    }

    pub fn names(&self) -> Vec<String> {
        self.triples.iter().map(|t| t.to_string()).collect()
    }
}

use JointRef::{Core, Point as P};

const CANONICAL: [AngleTriple; NUM_FEATURES] = [
    AngleTriple::new(P(Joint::Nose), P(Joint::REye), P(Joint::REar)),
    AngleTriple::new(P(Joint::Nose), P(Joint::LEye), P(Joint::LEar)),
    AngleTriple::new(P(Joint::Neck), P(Joint::Nose), P(Joint::REar)),
    AngleTriple::new(P(Joint::Neck), P(Joint::Nose), P(Joint::LEar)),
    AngleTriple::new(P(Joint::RShoulder), P(Joint::Neck), P(Joint::Nose)),
    AngleTriple::new(P(Joint::LShoulder), P(Joint::Neck), P(Joint::Nose)),
    AngleTriple::new(P(Joint::Neck), P(Joint::RShoulder), P(Joint::RElbow)),
    AngleTriple::new(P(Joint::Neck), P(Joint::LShoulder), P(Joint::LElbow)),
    AngleTriple::new(P(Joint::RShoulder), P(Joint::RElbow), P(Joint::RWrist)),
    AngleTriple::new(P(Joint::LShoulder), P(Joint::LElbow), P(Joint::LWrist)),
    AngleTriple::new(P(Joint::Nose), P(Joint::Neck), Core),
    AngleTriple::new(P(Joint::Neck), Core, P(Joint::RHip)),
    AngleTriple::new(P(Joint::Neck), Core, P(Joint::LHip)),
    AngleTriple::new(P(Joint::RHip), P(Joint::RKnee), P(Joint::RAnkle)),
    AngleTriple::new(P(Joint::LHip), P(Joint::LKnee), P(Joint::LAnkle)),
];

/// Zero-based index pairs of features that swap under a left/right mirror.
/// Feature 10 (Nose-Neck-Core) maps to itself.
pub const MIRROR_PAIRS: [(usize, usize); 7] = [(0, 1), (2, 3), (4, 5), (6, 7), (8, 9), (11, 12), (13, 14)];

/// Index of the Nose-Neck-Core feature.
pub const NOSE_NECK_CORE: usize = 10;

pub fn canonical_spec() -> EncodingSpec {
    EncodingSpec { triples: CANONICAL }
}

/// Feature index each feature maps to under a left/right relabel.
pub fn mirror_permutation() -> [usize; NUM_FEATURES] {
    let mut perm: [usize; NUM_FEATURES] = std::array::from_fn(|i| i);
    for (l, r) in MIRROR_PAIRS {
        perm.swap(l, r);
    }
    perm
}

/// Angle at `b` between `a - b` and `c - b`, in degrees. `None` when any
/// point is absent or any two points share coordinates exactly.
pub fn angle_at(a: Keypoint, b: Keypoint, c: Keypoint) -> Option<f64> {
    let (a, b, c) = (a.coords()?, b.coords()?, c.coords()?);
    if a == b || b == c || a == c {
        return None;
    }
    let u = (a.0 - b.0, a.1 - b.1);
    let v = (c.0 - b.0, c.1 - b.1);
    let norm = (u.0 * u.0 + u.1 * u.1).sqrt() * (v.0 * v.0 + v.1 * v.1).sqrt();
    // Distinct points can still underflow to a zero vector.
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    let cos = ((u.0 * v.0 + u.1 * v.1) / norm).clamp(-1.0, 1.0);
    Some(cos.acos().to_degrees())
}

/// Fifteen angles plus validity. Invalid entries hold NaN in `angles`.
#[derive(Debug, Clone, Copy)]
pub struct PoseEncoding {
    angles: [f64; NUM_FEATURES],
}

/// Invalid entries compare equal to each other.
impl PartialEq for PoseEncoding {
    fn eq(&self, other: &Self) -> bool {
        self.values() == other.values()
    }
}

impl PoseEncoding {
    pub fn from_options(values: [Option<f64>; NUM_FEATURES]) -> Self {
        PoseEncoding {
            angles: values.map(|v| v.unwrap_or(f64::NAN)),
        }
    }

    /// NaN (or any non-finite value) marks an entry invalid.
    pub fn from_raw(values: [f64; NUM_FEATURES]) -> Self {
        PoseEncoding {
            angles: values.map(|v| if v.is_finite() { v } else { f64::NAN }),
        }
    }

    pub fn all_invalid() -> Self {
        PoseEncoding {
            angles: [f64::NAN; NUM_FEATURES],
        }
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        let v = self.angles[i];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_valid(&self, i: usize) -> bool {
        !self.angles[i].is_nan()
    }

    pub fn mask(&self) -> [bool; NUM_FEATURES] {
        std::array::from_fn(|i| self.is_valid(i))
    }

    pub fn invalid_count(&self) -> usize {
        self.angles.iter().filter(|v| v.is_nan()).count()
    }

    /// Raw angles with NaN for invalid entries.
    pub fn raw(&self) -> &[f64; NUM_FEATURES] {
        &self.angles
    }

    pub fn values(&self) -> [Option<f64>; NUM_FEATURES] {
        std::array::from_fn(|i| self.get(i))
    }

    /// Reorders features by `perm` (output `i` takes input `perm[i]`).
    pub fn permuted(&self, perm: &[usize; NUM_FEATURES]) -> Self {
        PoseEncoding {
            angles: std::array::from_fn(|i| self.angles[perm[i]]),
        }
    }
}

fn resolve(frame: &KeypointFrame, neck: Keypoint, core: Keypoint, joint: JointRef) -> Keypoint {
    match joint {
        JointRef::Point(Joint::Neck) => neck,
        JointRef::Point(j) => frame.get(j),
        JointRef::Core => core,
    }
}

/// Encodes a frame with an explicit feature table.
pub fn encode_with(spec: &EncodingSpec, frame: &KeypointFrame) -> PoseEncoding {
    let neck = derive_neck(frame);
    let core = derive_core(frame);
    let values = spec.triples.map(|t| {
        angle_at(
            resolve(frame, neck, core, t.a),
            resolve(frame, neck, core, t.vertex),
            resolve(frame, neck, core, t.c),
        )
    });
    PoseEncoding::from_options(values)
}

pub fn encode(frame: &KeypointFrame) -> PoseEncoding {
    encode_with(&EncodingSpec { triples: CANONICAL }, frame)
}
