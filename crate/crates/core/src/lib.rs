//! Real-time activeness classification from 2D pose keypoints.
//!
//! Frames of 18 COCO-ordered keypoints are encoded as 15 joint angles,
//! imputed and scaled with training statistics, classified into four
//! activeness levels by a tree ensemble, and fed to a per-person debounce
//! that raises webhook alerts on sustained lethargy.

pub mod alert;
pub mod encoder;
pub mod forest;
pub mod level;
pub mod pipeline;
pub mod preprocess;
pub mod skeleton;

pub use encoder::{canonical_spec, encode, PoseEncoding, NUM_FEATURES};
pub use level::Level;
pub use skeleton::{parse_frame, Joint, Keypoint, KeypointFrame};
