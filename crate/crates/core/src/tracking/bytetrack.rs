use super::{associate, iou_costs, TrackStatus, Tracker};
use crate::error::Result;
use crate::geometry::FrameDetections;
use crate::kalman::NoiseConfig;

impl Tracker {
    /// Two-stage confidence-split IoU association.
    ///
    /// Confirmed and lost tracks are matched against high-score detections
    /// first; tentative tracks then try the leftover high-score detections;
    /// whatever confirmed or lost tracks remain get a second chance against
    /// the low-score detections. Only high-score detections start tracks.
    pub fn bytetrack_step(&mut self, frame: &FrameDetections) -> Result<()> {
        self.check_order(frame)?;
        let noise = NoiseConfig {
            nsa_enabled: false,
            ..self.cfg.noise
        };
        self.predict_all(&noise);

        let dets = &frame.detections;
        let (tau_high, tau_low) = (self.cfg.tau_high, self.cfg.tau_low);
        let high: Vec<usize> = (0..dets.len())
            .filter(|&i| dets[i].confidence() >= tau_high)
            .collect();
        let low: Vec<usize> = (0..dets.len())
            .filter(|&i| (tau_low..tau_high).contains(&dets[i].confidence()))
            .collect();

        let pool: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| matches!(self.tracks[i].status, TrackStatus::Confirmed | TrackStatus::Lost))
            .collect();
        let tentative: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].status == TrackStatus::Tentative)
            .collect();
        let min_iou = self.cfg.iou_match_threshold;

        let (mut matched, remaining_tracks, remaining_high) = associate(
            iou_costs(&self.tracks, &pool, dets, &high, min_iou),
            &pool,
            &high,
        );

        let (m_tent, _, unmatched_high) = associate(
            iou_costs(&self.tracks, &tentative, dets, &remaining_high, min_iou),
            &tentative,
            &remaining_high,
        );
        matched.extend(m_tent);

        let (m_low, _, _) = associate(
            iou_costs(&self.tracks, &remaining_tracks, dets, &low, min_iou),
            &remaining_tracks,
            &low,
        );
        matched.extend(m_low);

        for (t, d) in matched {
            self.tracks[t].apply(&dets[d], frame.frame_index, &self.cfg, &noise)?;
        }
        self.age_unmatched();
        for d in unmatched_high {
            self.spawn(&dets[d], frame.frame_index, &noise);
        }
        Ok(())
    }
}
