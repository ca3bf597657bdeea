//! Detection-stream multi-object tracking and line-crossing counting for
//! seed-flow videos.
//!
//! The crate covers the full offline pipeline: a constant-velocity Kalman
//! filter with confidence-adaptive measurement noise, an exact linear
//! assignment solver, ByteTrack and StrongSORT-style trackers, a counting
//! line, a seeded seed-flow simulator, a synthetic dataset compositor, and
//! detection/counting metrics.

pub mod assignment;
pub mod config;
pub mod counting;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod kalman;
pub mod pipeline;
pub mod simulator;
pub mod tracking;

pub use error::{Error, Result};
pub use geometry::{iou, BBox, Detection, DetectionStream, FrameDetections, RoILine};
