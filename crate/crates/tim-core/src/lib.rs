//! Classification of AV trajectory segments into traffic-light and stop-sign
//! interaction categories, trajectory organization and quality enhancement,
//! and Intelligent Driver Model calibration on stop-at-light trajectories.
//!
//! The pipeline mirrors a batch workflow: ingest 9.1 s segments, run the
//! geometric rule engines, emit organized per-timestep records, score and
//! denoise them, and calibrate a car-following model on the stop category.

pub mod clustering;
pub mod geometry;
pub mod idm;
pub mod io;
pub mod light_rules;
pub mod model;
pub mod organize;
pub mod quality;
pub mod sign_rules;
pub mod signal;
pub mod synthgen;

pub use model::{InteractionCategory, Point, Segment, TrajectoryRecord};
pub use organize::{classify_segment, organize_record, SegmentClassification};
