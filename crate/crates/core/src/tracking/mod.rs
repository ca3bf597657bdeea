//! Track lifecycle and the two association strategies.
//!
//! [`Tracker`] owns every track created during a run. Frames must be fed in
//! strictly increasing order. `Removed` tracks are archived and never take
//! part in association again; their ids are never reused.

mod bytetrack;
mod strongsort;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::assignment::{self, AssignmentResult, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, Detection, FrameDetections};
use crate::kalman::{self, KalmanState, NoiseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    ByteTrack,
    StrongSort,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::ByteTrack => "bytetrack",
            Algorithm::StrongSort => "strongsort",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bytetrack" => Ok(Algorithm::ByteTrack),
            "strongsort" => Ok(Algorithm::StrongSort),
            other => Err(Error::config(
                "algorithm",
                format!("expected bytetrack or strongsort, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Lost,
    Removed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub algorithm: Algorithm,
    /// Detections at or above this confidence form the first association stage.
    pub tau_high: f64,
    /// Detections in `[tau_low, tau_high)` form the second stage.
    pub tau_low: f64,
    /// Minimum IoU for a motion-only match.
    pub iou_match_threshold: f64,
    /// Frames a lost track is kept at 30 fps; scaled linearly with the frame rate.
    pub rebirth_buffer_frames: u32,
    /// EMA momentum of the appearance state.
    pub ema_alpha: f64,
    /// Weight of cosine distance against `1 - iou` in the StrongSORT cost.
    pub appearance_weight: f64,
    /// Largest cosine distance accepted when both sides carry embeddings.
    pub appearance_gate: f64,
    /// Squared Mahalanobis gate (chi-square 0.95 quantile, 4 dof).
    pub mahalanobis_gate: f64,
    pub min_hits_to_confirm: u32,
    /// StrongSORT ignores detections below this confidence.
    pub detection_confidence_floor: f64,
    pub noise: NoiseConfig,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            algorithm: Algorithm::ByteTrack,
            tau_high: 0.6,
            tau_low: 0.1,
            iou_match_threshold: 0.5,
            rebirth_buffer_frames: 30,
            ema_alpha: 0.9,
            appearance_weight: 0.98,
            appearance_gate: 0.4,
            mahalanobis_gate: 9.4877,
            min_hits_to_confirm: 2,
            detection_confidence_floor: 0.4,
            noise: NoiseConfig {
                nsa_enabled: true,
                ..NoiseConfig::default()
            },
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(name, format!("must lie in [0, 1], got {v}")))
            }
        };
        unit("tau_high", self.tau_high)?;
        unit("tau_low", self.tau_low)?;
        unit("iou_match_threshold", self.iou_match_threshold)?;
        unit("ema_alpha", self.ema_alpha)?;
        unit("appearance_weight", self.appearance_weight)?;
        unit("detection_confidence_floor", self.detection_confidence_floor)?;
        if self.tau_low > self.tau_high {
            return Err(Error::config(
                "tau_low",
                format!("must not exceed tau_high ({} > {})", self.tau_low, self.tau_high),
            ));
        }
        if !(self.appearance_gate >= 0.0 && self.appearance_gate <= 2.0) {
            return Err(Error::config("appearance_gate", "must lie in [0, 2]"));
        }
        if !(self.mahalanobis_gate.is_finite() && self.mahalanobis_gate > 0.0) {
            return Err(Error::config("mahalanobis_gate", "must be positive"));
        }
        if self.min_hits_to_confirm == 0 {
            return Err(Error::config("min_hits_to_confirm", "must be at least 1"));
        }
        self.noise.validate()
    }

    /// Lost-track buffer in frames at the given frame rate.
    pub fn rebirth_buffer_at(&self, fps: f64) -> u32 {
        ((f64::from(self.rebirth_buffer_frames) * fps / 30.0).round() as u32).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub state: KalmanState,
    pub embedding: Option<Vec<f32>>,
    pub status: TrackStatus,
    pub frames_since_update: u32,
    pub hits: u32,
    pub class_id: u32,
    /// Center y at the observation before the most recent one.
    pub last_center_y: f64,
    /// Center y after the most recent observation.
    pub center_y: f64,
    pub counted: bool,
    pub first_frame: u64,
    pub last_frame: u64,
}

impl Track {
    fn new(id: u64, det: &Detection, frame: u64, noise: &NoiseConfig) -> Self {
        let state = kalman::initiate(&det.bbox, noise);
        let cy = state.cy();
        Track {
            id,
            state,
            embedding: det.embedding().map(<[f32]>::to_vec),
            status: TrackStatus::Tentative,
            frames_since_update: 0,
            hits: 1,
            class_id: det.class_id,
            last_center_y: cy,
            center_y: cy,
            counted: false,
            first_frame: frame,
            last_frame: frame,
        }
    }

    /// True when the track was matched on the frame just processed.
    pub fn is_observed(&self) -> bool {
        self.frames_since_update == 0
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.state.bbox()
    }

    fn predict(&mut self, noise: &NoiseConfig) {
        self.state = kalman::predict(&self.state, noise);
        self.frames_since_update += 1;
    }

    fn apply(&mut self, det: &Detection, frame: u64, cfg: &TrackerConfig, noise: &NoiseConfig) -> Result<()> {
        self.state = kalman::update(&self.state, &det.bbox, det.confidence(), noise)?;
        if let (Some(e), Some(f)) = (self.embedding.as_mut(), det.embedding()) {
            ema_update(e, f, cfg.ema_alpha);
        } else if self.embedding.is_none() {
            self.embedding = det.embedding().map(<[f32]>::to_vec);
        }
        self.hits += 1;
        self.frames_since_update = 0;
        self.last_frame = frame;
        self.class_id = det.class_id;
        self.last_center_y = self.center_y;
        self.center_y = self.state.cy();
        match self.status {
            TrackStatus::Tentative if self.hits >= cfg.min_hits_to_confirm => {
                self.status = TrackStatus::Confirmed
            }
            TrackStatus::Lost => self.status = TrackStatus::Confirmed,
            _ => {}
        }
        Ok(())
    }
}

/// `e <- alpha * e + (1 - alpha) * f`, then renormalized to unit length.
pub fn ema_update(e: &mut [f32], f: &[f32], alpha: f64) {
    let mut norm = 0.0f64;
    let mut mixed: Vec<f64> = e
        .iter()
        .zip(f)
        .map(|(&a, &b)| {
            let v = alpha * f64::from(a) + (1.0 - alpha) * f64::from(b);
            norm += v * v;
            v
        })
        .collect();
    let norm = norm.sqrt();
    if norm > 0.0 {
        mixed.iter_mut().for_each(|v| *v /= norm);
        for (dst, v) in e.iter_mut().zip(mixed) {
            *dst = v as f32;
        }
    }
}

/// `1 - cos(a, b)` for unit vectors.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
    (1.0 - dot).max(0.0)
}

/// Number of distinct ids among the given tracks.
pub fn unique_id_count<'a>(tracks: impl IntoIterator<Item = &'a Track>) -> usize {
    tracks.into_iter().map(|t| t.id).collect::<BTreeSet<_>>().len()
}

/// Multi-object tracker running one of the two association strategies.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: TrackerConfig,
    fps: f64,
    rebirth_buffer: u32,
    tracks: Vec<Track>,
    removed: Vec<Track>,
    next_id: u64,
    last_frame: Option<u64>,
    embedding_dim: Option<usize>,
    warned_degraded: bool,
}

impl Tracker {
    pub fn new(cfg: TrackerConfig, fps: f64) -> Result<Self> {
        cfg.validate()?;
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::config("fps", format!("must be positive, got {fps}")));
        }
        Ok(Tracker {
            rebirth_buffer: cfg.rebirth_buffer_at(fps),
            cfg,
            fps,
            tracks: Vec::new(),
            removed: Vec::new(),
            next_id: 1,
            last_frame: None,
            embedding_dim: None,
            warned_degraded: false,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn rebirth_buffer(&self) -> u32 {
        self.rebirth_buffer
    }

    /// Tracks that have not been removed.
    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn tracks_mut(&mut self) -> &mut [Track] {
        &mut self.tracks
    }

    /// Every track created so far, removed ones included, in id order.
    pub fn all_tracks(&self) -> Vec<&Track> {
        let mut all: Vec<&Track> = self.removed.iter().chain(&self.tracks).collect();
        all.sort_by_key(|t| t.id);
        all
    }

    pub fn unique_id_count(&self) -> usize {
        unique_id_count(self.removed.iter().chain(&self.tracks))
    }

    /// Runs the configured association strategy on one frame.
    pub fn step(&mut self, frame: &FrameDetections) -> Result<()> {
        match self.cfg.algorithm {
            Algorithm::ByteTrack => self.bytetrack_step(frame),
            Algorithm::StrongSort => self.strongsort_step(frame),
        }
    }

    fn check_order(&mut self, frame: &FrameDetections) -> Result<()> {
        if let Some(last) = self.last_frame {
            if frame.frame_index <= last {
                return Err(Error::FrameOrder {
                    last,
                    got: frame.frame_index,
                });
            }
        }
        self.last_frame = Some(frame.frame_index);
        Ok(())
    }

    fn predict_all(&mut self, noise: &NoiseConfig) {
        for t in &mut self.tracks {
            t.predict(noise);
        }
    }

    fn spawn(&mut self, det: &Detection, frame: u64, noise: &NoiseConfig) {
        let track = Track::new(self.next_id, det, frame, noise);
        self.next_id += 1;
        self.tracks.push(track);
    }

    /// Marks unmatched tracks lost or removed and archives removed ones.
    fn age_unmatched(&mut self) {
        let buffer = self.rebirth_buffer;
        for t in &mut self.tracks {
            if t.is_observed() {
                continue;
            }
            t.status = match t.status {
                TrackStatus::Tentative => TrackStatus::Removed,
                _ if t.frames_since_update > buffer => TrackStatus::Removed,
                TrackStatus::Confirmed | TrackStatus::Lost => TrackStatus::Lost,
                TrackStatus::Removed => TrackStatus::Removed,
            };
        }
        let (gone, live): (Vec<Track>, Vec<Track>) = std::mem::take(&mut self.tracks)
            .into_iter()
            .partition(|t| t.status == TrackStatus::Removed);
        self.tracks = live;
        self.removed.extend(gone);
    }
}

/// IoU association of `track_idx` against `det_idx`. Returns matched
/// `(track, detection)` index pairs in terms of the original slices.
fn associate(
    costs: CostMatrix,
    track_idx: &[usize],
    det_idx: &[usize],
) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
    let AssignmentResult {
        matches,
        unmatched_rows,
        unmatched_cols,
    } = assignment::solve(&costs);
    (
        matches
            .into_iter()
            .map(|(r, c)| (track_idx[r], det_idx[c]))
            .collect(),
        unmatched_rows.into_iter().map(|r| track_idx[r]).collect(),
        unmatched_cols.into_iter().map(|c| det_idx[c]).collect(),
    )
}

/// `1 - iou` between predicted track boxes and detections, gated at
/// `1 - min_iou`.
fn iou_costs(tracks: &[Track], track_idx: &[usize], dets: &[Detection], det_idx: &[usize], min_iou: f64) -> CostMatrix {
    CostMatrix::from_fn(track_idx.len(), det_idx.len(), |r, c| {
        match tracks[track_idx[r]].bbox() {
            Some(b) => 1.0 - iou(&b, &dets[det_idx[c]].bbox),
            None => CostMatrix::FORBIDDEN,
        }
    })
    .expect("iou costs are finite")
    .gate(1.0 - min_iou)
}
