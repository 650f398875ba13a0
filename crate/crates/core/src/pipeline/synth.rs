//! Synthetic labeled poses.
//!
//! A parametric stick figure whose head/torso slump and arm droop are drawn
//! from per-level bands. Level 4 is upright (slump in [0, 10) degrees) and
//! Level 1 is heavily slumped ([45, 80)). Positions, body size, lean side
//! and knee bend vary freely; pixel noise and random occlusion are applied
//! last. The bands are invented for this generator, not measured.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::level::Level;
use crate::skeleton::{Joint, Keypoint, KeypointFrame, NUM_KEYPOINTS};

/// Half-open slump band (degrees) of each level.
pub fn slump_band(level: Level) -> (f64, f64) {
    match level {
        Level::L4 => (0.0, 10.0),
        Level::L3 => (10.0, 25.0),
        Level::L2 => (25.0, 45.0),
        Level::L1 => (45.0, 80.0),
    }
}

/// Level whose band contains `theta`; values past either end clamp to the
/// extreme level.
pub fn level_for_slump(theta: f64) -> Level {
    if theta < 10.0 {
        Level::L4
    } else if theta < 25.0 {
        Level::L3
    } else if theta < 45.0 {
        Level::L2
    } else {
        Level::L1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticPoseParams {
    /// Fixed slump for every figure; `None` samples it from each level's band.
    pub slump_angle: Option<f64>,
    /// Fixed arm droop; `None` samples it from the row's level band.
    pub arm_droop: Option<f64>,
    pub noise_sigma: f64,
    pub occlusion_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticPoseParams {
    fn default() -> Self {
        SyntheticPoseParams {
            slump_angle: None,
            arm_droop: None,
            noise_sigma: 1.0,
            occlusion_prob: 0.05,
            seed: 0,
        }
    }
}

/// Pose parameters of one figure, in degrees and pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Figure {
    pub slump: f64,
    pub arm_droop: f64,
    /// +1 or -1: side the torso leans and the head tilts toward.
    pub side: f64,
    pub height: f64,
    pub origin: (f64, f64),
    pub knee_bend: (f64, f64),
    pub arm_jitter: (f64, f64),
}

impl Figure {
    pub fn upright(height: f64, origin: (f64, f64)) -> Self {
        Figure {
            slump: 0.0,
            arm_droop: 0.0,
            side: 1.0,
            height,
            origin,
            knee_bend: (0.0, 0.0),
            arm_jitter: (0.0, 0.0),
        }
    }
}

type V = (f64, f64);

fn add(a: V, b: V) -> V {
    (a.0 + b.0, a.1 + b.1)
}

fn scale(s: f64, v: V) -> V {
    (s * v.0, s * v.1)
}

/// Rotation by `deg` degrees, clockwise on screen (image y grows downward).
fn rot(v: V, deg: f64) -> V {
    let (s, c) = deg.to_radians().sin_cos();
    (v.0 * c - v.1 * s, v.0 * s + v.1 * c)
}

/// Noise-free keypoints of a figure, Neck included.
pub fn figure_points(fig: &Figure) -> [Keypoint; NUM_KEYPOINTS] {
    let h = fig.height;
    let up: V = (0.0, -1.0);
    let down: V = (0.0, 1.0);
    let right: V = (1.0, 0.0);

    let core = fig.origin;
    let torso = rot(up, fig.side * fig.slump * 0.5);
    let lateral = rot(torso, 90.0);
    let neck = add(core, scale(0.30 * h, torso));
    let r_shoulder = add(neck, scale(-0.11 * h, lateral));
    let l_shoulder = add(neck, scale(0.11 * h, lateral));

    let head = rot(torso, fig.side * fig.slump);
    let head_lat = rot(head, 90.0);
    let nose = add(neck, scale(0.13 * h, head));
    let eye = |s: f64| add(nose, add(scale(0.03 * h, head), scale(s * 0.025 * h, head_lat)));
    let ear = |s: f64| add(nose, add(scale(0.01 * h, head), scale(s * 0.06 * h, head_lat)));

    // Upper arms swing in towards the torso as the droop grows; elbows
    // straighten from a right angle towards fully extended.
    let arm = |shoulder: V, outward: f64, droop: f64| -> (V, V) {
        let abduction = (35.0 - 0.3 * droop).max(0.0);
        let upper = rot(scale(-1.0, torso), -outward * abduction);
        let elbow = add(shoulder, scale(0.17 * h, upper));
        let bend = 90.0 - droop;
        let fore = rot(upper, outward * bend);
        (elbow, add(elbow, scale(0.15 * h, fore)))
    };
    // On screen the person's right side is at smaller x.
    let (r_elbow, r_wrist) = arm(r_shoulder, 1.0, fig.arm_droop + fig.arm_jitter.0);
    let (l_elbow, l_wrist) = arm(l_shoulder, -1.0, fig.arm_droop + fig.arm_jitter.1);

    let r_hip = add(core, scale(-0.08 * h, right));
    let l_hip = add(core, scale(0.08 * h, right));
    let leg = |hip: V, bend: f64| -> (V, V) {
        let knee = add(hip, scale(0.24 * h, down));
        (knee, add(knee, scale(0.24 * h, rot(down, bend))))
    };
    let (r_knee, r_ankle) = leg(r_hip, fig.knee_bend.0);
    let (l_knee, l_ankle) = leg(l_hip, -fig.knee_bend.1);

    let mut pts = [Keypoint::ABSENT; NUM_KEYPOINTS];
    let mut put = |j: Joint, p: V| pts[j.index()] = Keypoint::new(p.0, p.1);
    put(Joint::Nose, nose);
    put(Joint::Neck, neck);
    put(Joint::RShoulder, r_shoulder);
    put(Joint::RElbow, r_elbow);
    put(Joint::RWrist, r_wrist);
    put(Joint::LShoulder, l_shoulder);
    put(Joint::LElbow, l_elbow);
    put(Joint::LWrist, l_wrist);
    put(Joint::RHip, r_hip);
    put(Joint::RKnee, r_knee);
    put(Joint::RAnkle, r_ankle);
    put(Joint::LHip, l_hip);
    put(Joint::LKnee, l_knee);
    put(Joint::LAnkle, l_ankle);
    put(Joint::REye, eye(-1.0));
    put(Joint::LEye, eye(1.0));
    put(Joint::REar, ear(-1.0));
    put(Joint::LEar, ear(1.0));
    pts
}

fn sample_in(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..hi)
}

/// Labeled frame with its generating parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub frame: KeypointFrame,
    pub label: Level,
    pub figure: Figure,
}

pub struct Generator {
    params: SyntheticPoseParams,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    next_id: u64,
}

pub const FRAME_INTERVAL_MS: u64 = 33;
pub const BASE_TS_MS: u64 = 1_600_000_000_000;

impl Generator {
    pub fn new(params: SyntheticPoseParams) -> Self {
        let noise = (params.noise_sigma > 0.0).then(|| Normal::new(0.0, params.noise_sigma).expect("finite sigma"));
        Generator {
            rng: ChaCha8Rng::seed_from_u64(params.seed),
            params,
            noise,
            next_id: 0,
        }
    }

    fn figure_for(&mut self, level: Level) -> (Figure, Level) {
        let slump = match self.params.slump_angle {
            Some(t) => t,
            None => sample_in(&mut self.rng, slump_band(level)),
        };
        let label = level_for_slump(slump);
        let arm_droop = match self.params.arm_droop {
            Some(d) => d,
            None => sample_in(&mut self.rng, slump_band(label)),
        };
        let side = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let height = self.rng.random_range(300.0..450.0);
        let origin = (self.rng.random_range(200.0..1000.0), self.rng.random_range(300.0..500.0));
        let knee_bend = (self.rng.random_range(0.0..15.0), self.rng.random_range(0.0..15.0));
        let arm_jitter = if self.params.arm_droop.is_some() {
            (0.0, 0.0)
        } else {
            (self.rng.random_range(-2.0..2.0), self.rng.random_range(-2.0..2.0))
        };
        let fig = Figure {
            slump,
            arm_droop,
            side,
            height,
            origin,
            knee_bend,
            arm_jitter,
        };
        (fig, label)
    }

    fn finish(&mut self, mut pts: [Keypoint; NUM_KEYPOINTS]) -> [Keypoint; NUM_KEYPOINTS] {
        for p in pts.iter_mut() {
            if let Some(noise) = self.noise {
                let (dx, dy) = (noise.sample(&mut self.rng), noise.sample(&mut self.rng));
                *p = p.map(|x, y| (x + dx, y + dy));
            }
            if self.params.occlusion_prob > 0.0 && self.rng.random_bool(self.params.occlusion_prob.min(1.0)) {
                *p = Keypoint::ABSENT;
            }
        }
        pts
    }

    pub fn sample(&mut self, level: Level) -> SyntheticSample {
        let (figure, label) = self.figure_for(level);
        let pts = self.finish(figure_points(&figure));
        let id = self.next_id;
        self.next_id += 1;
        SyntheticSample {
            frame: KeypointFrame::new(id, BASE_TS_MS + id * FRAME_INTERVAL_MS, 0, pts),
            label,
            figure,
        }
    }
}

/// `4 * n_per_class` samples, classes interleaved L1, L2, L3, L4, L1, ...
pub fn synthesize(params: &SyntheticPoseParams, n_per_class: usize) -> Vec<SyntheticSample> {
    let mut g = Generator::new(params.clone());
    (0..n_per_class)
        .flat_map(|_| Level::ALL)
        .map(|l| g.sample(l))
        .collect::<Vec<_>>()
}

/// A stream of `n` frames for one level (timestamps 33 ms apart).
pub fn level_stream(params: &SyntheticPoseParams, level: Level, n: usize) -> Vec<SyntheticSample> {
    let mut g = Generator::new(params.clone());
    (0..n).map(|_| g.sample(level)).collect()
}
