//! Tracking plus counting over a whole detection stream.

use crate::counting::{CountReport, LineCounter};
use crate::error::Result;
use crate::geometry::{BBox, DetectionStream, RoILine};
use crate::tracking::{Tracker, TrackerConfig};

/// One observed confirmed track on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedBox {
    pub frame_index: u64,
    pub track_id: u64,
    pub bbox: BBox,
    pub class_id: u32,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: CountReport,
    pub tracked: Vec<TrackedBox>,
    pub counted_ids: Vec<u64>,
}

pub fn run(
    stream: &DetectionStream,
    cfg: &TrackerConfig,
    line: RoILine,
    frame_height: f64,
    actual_count: Option<i64>,
) -> Result<PipelineOutput> {
    let mut tracker = Tracker::new(cfg.clone(), stream.fps)?;
    let mut counter = LineCounter::new(line, frame_height);
    let mut tracked = Vec::new();
    for frame in &stream.frames {
        tracker.step(frame)?;
        counter.observe_frame(tracker.tracks_mut());
        tracked.extend(tracker.tracks().iter().filter(|t| t.is_observed()).filter_map(|t| {
            t.bbox().map(|bbox| TrackedBox {
                frame_index: frame.frame_index,
                track_id: t.id,
                bbox,
                class_id: t.class_id,
            })
        }));
    }
    let report = counter.finalize(tracker.unique_id_count() as u64, actual_count)?;
    Ok(PipelineOutput {
        report,
        tracked,
        counted_ids: counter.counted_ids().to_vec(),
    })
}
