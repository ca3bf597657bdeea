use super::{associate, cosine_distance, iou_costs, TrackStatus, Tracker};
use crate::assignment::CostMatrix;
use crate::error::{Error, Result};
use crate::geometry::{iou, FrameDetections};
use crate::kalman;

impl Tracker {
    /// Appearance plus motion association over the NSA Kalman filter.
    ///
    /// Confirmed and lost tracks are matched with the cost
    /// `λ·cosine + (1 − λ)·(1 − iou)`, with cells outside the Mahalanobis
    /// gate forbidden. Tentative tracks, and confirmed tracks that were seen
    /// on the previous frame but missed the first stage, then get an IoU
    /// pass. Pairs where either side lacks an embedding use λ = 0.
    pub fn strongsort_step(&mut self, frame: &FrameDetections) -> Result<()> {
        self.check_order(frame)?;
        let noise = self.cfg.noise;
        let floor = self.cfg.detection_confidence_floor;
        let dets = &frame.detections;

        for d in dets {
            match (d.embedding(), self.embedding_dim) {
                (Some(e), Some(dim)) if e.len() != dim => {
                    return Err(Error::EmbeddingDim {
                        expected: dim,
                        got: e.len(),
                    })
                }
                (Some(e), None) => self.embedding_dim = Some(e.len()),
                (None, _) if !self.warned_degraded => {
                    log::warn!("detections without embeddings: StrongSORT falls back to motion-only cost");
                    self.warned_degraded = true;
                }
                _ => {}
            }
        }

        self.predict_all(&noise);

        let kept: Vec<usize> = (0..dets.len())
            .filter(|&i| dets[i].confidence() >= floor)
            .collect();
        let pool: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| matches!(self.tracks[i].status, TrackStatus::Confirmed | TrackStatus::Lost))
            .collect();

        let lambda = self.cfg.appearance_weight;
        let gate = self.cfg.mahalanobis_gate;
        let app_gate = self.cfg.appearance_gate;
        let tracks = &self.tracks;
        let costs = CostMatrix::from_fn(pool.len(), kept.len(), |r, c| {
            let t = &tracks[pool[r]];
            let d = &dets[kept[c]];
            let Some(tb) = t.bbox() else {
                return CostMatrix::FORBIDDEN;
            };
            match kalman::gating_distance(&t.state, &d.bbox, &noise) {
                Ok(g) if g <= gate => {}
                _ => return CostMatrix::FORBIDDEN,
            }
            let motion = 1.0 - iou(&tb, &d.bbox);
            match (t.embedding.as_deref(), d.embedding()) {
                (Some(te), Some(de)) => {
                    let app = cosine_distance(te, de);
                    if app > app_gate {
                        CostMatrix::FORBIDDEN
                    } else {
                        lambda * app + (1.0 - lambda) * motion
                    }
                }
                _ => motion,
            }
        })
        .expect("association costs are finite");
        let (mut matched, unmatched_pool, remaining) = associate(costs, &pool, &kept);

        let mut second: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].status == TrackStatus::Tentative)
            .collect();
        second.extend(
            unmatched_pool
                .into_iter()
                .filter(|&i| self.tracks[i].frames_since_update == 1),
        );
        second.sort_unstable();
        let (m_iou, _, unmatched_dets) = associate(
            iou_costs(&self.tracks, &second, dets, &remaining, self.cfg.iou_match_threshold),
            &second,
            &remaining,
        );
        matched.extend(m_iou);

        for (t, d) in matched {
            self.tracks[t].apply(&dets[d], frame.frame_index, &self.cfg, &noise)?;
        }
        self.age_unmatched();
        for d in unmatched_dets {
            self.spawn(&dets[d], frame.frame_index, &noise);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use crate::geometry::{BBox, Detection, FrameDetections};
    use crate::tracking::{Algorithm, TrackStatus, Tracker, TrackerConfig};

    fn cfg() -> TrackerConfig {
        TrackerConfig {
            algorithm: Algorithm::StrongSort,
            ..TrackerConfig::default()
        }
    }

    fn det(x: f64, y: f64, conf: f64, emb: Option<Vec<f32>>) -> Detection {
        let d = Detection::new(BBox::new(x, y, 20.0, 20.0).unwrap(), conf, 0).unwrap();
        match emb {
            Some(e) => d.with_embedding(e).unwrap(),
            None => d,
        }
    }

    #[test]
    fn identical_detection_always_matches() {
        let mut t = Tracker::new(cfg(), 30.0).unwrap();
        let e = Some(vec![0.6, 0.8]);
        for i in 0..10 {
            let f = FrameDetections::new(i, 30.0, vec![det(50.0, 50.0, 0.9, e.clone())]);
            t.step(&f).unwrap();
        }
        assert_eq!(t.unique_id_count(), 1);
        let tr = &t.tracks()[0];
        assert_eq!(tr.status, TrackStatus::Confirmed);
        assert_eq!(tr.hits, 10);
        let emb = tr.embedding.as_ref().unwrap();
        assert!((emb[0] - 0.6).abs() < 1e-6 && (emb[1] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn appearance_resolves_crossing_pair() {
        let mut t = Tracker::new(cfg(), 30.0).unwrap();
        let a = vec![1.0, 0.0, 0.0];
        let b = vec![0.0, 1.0, 0.0];
        // Two objects sitting still side by side.
        for i in 0..5 {
            let f = FrameDetections::new(
                i,
                30.0,
                vec![det(0.0, 0.0, 0.9, Some(a.clone())), det(15.0, 0.0, 0.9, Some(b.clone()))],
            );
            t.step(&f).unwrap();
        }
        let id_a = t.tracks().iter().find(|tr| tr.bbox().unwrap().x_min() < 5.0).unwrap().id;
        // Detections listed in swapped order still map by appearance.
        let f = FrameDetections::new(
            5,
            30.0,
            vec![det(15.0, 0.0, 0.9, Some(b.clone())), det(0.0, 0.0, 0.9, Some(a.clone()))],
        );
        t.step(&f).unwrap();
        let tr = t.tracks().iter().find(|tr| tr.id == id_a).unwrap();
        assert!(tr.bbox().unwrap().x_min() < 5.0);
        assert_eq!(t.unique_id_count(), 2);
    }

    #[test]
    fn below_floor_ignored() {
        let mut t = Tracker::new(cfg(), 30.0).unwrap();
        t.step(&FrameDetections::new(0, 30.0, vec![det(0.0, 0.0, 0.3, None)])).unwrap();
        assert!(t.tracks().is_empty());
        t.step(&FrameDetections::new(1, 30.0, vec![det(0.0, 0.0, 0.45, None)])).unwrap();
        assert_eq!(t.tracks().len(), 1);
    }

    #[test]
    fn embedding_dimension_mismatch() {
        let mut t = Tracker::new(cfg(), 30.0).unwrap();
        t.step(&FrameDetections::new(0, 30.0, vec![det(0.0, 0.0, 0.9, Some(vec![1.0, 0.0]))]))
            .unwrap();
        let err = t
            .step(&FrameDetections::new(1, 30.0, vec![det(0.0, 0.0, 0.9, Some(vec![1.0, 0.0, 0.0]))]))
            .unwrap_err();
        assert!(matches!(err, crate::error::Error::EmbeddingDim { expected: 2, got: 3 }));
    }

    #[test]
    fn degraded_mode_tracks_by_motion() {
        let mut t = Tracker::new(cfg(), 30.0).unwrap();
        for i in 0..20 {
            let f = FrameDetections::new(i, 30.0, vec![det(10.0, 2.0 * i as f64, 0.9, None)]);
            t.step(&f).unwrap();
        }
        assert_eq!(t.unique_id_count(), 1);
        assert_eq!(t.tracks()[0].hits, 20);
    }
}
