//! Line-crossing counter. Each confirmed track adds one to its class when its
//! center first moves downward across the line; a track is counted at most once.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{crossed_line, RoILine};
use crate::tracking::{Track, TrackStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct CountReport {
    pub per_class_counts: BTreeMap<u32, u64>,
    pub total_count: u64,
    pub unique_ids: u64,
    pub actual_count: Option<u64>,
    pub accuracy_pct: Option<f64>,
}

/// `100 * count / actual`. Errors when `actual` is not positive.
pub fn accuracy_pct(count: u64, actual: i64) -> Result<f64> {
    if actual <= 0 {
        return Err(Error::ZeroActualCount(actual));
    }
    Ok(100.0 * count as f64 / actual as f64)
}

#[derive(Debug, Clone)]
pub struct LineCounter {
    line: RoILine,
    frame_height: f64,
    per_class: BTreeMap<u32, u64>,
    counted_ids: Vec<u64>,
}

impl LineCounter {
    pub fn new(line: RoILine, frame_height: f64) -> Self {
        LineCounter {
            line,
            frame_height,
            per_class: BTreeMap::new(),
            counted_ids: Vec::new(),
        }
    }

    pub fn line(&self) -> RoILine {
        self.line
    }

    pub fn total(&self) -> u64 {
        self.per_class.values().sum()
    }

    /// Ids counted so far, in counting order.
    pub fn counted_ids(&self) -> &[u64] {
        &self.counted_ids
    }

    /// Counts every confirmed, observed, not-yet-counted track whose center
    /// crossed the line between its last two observations.
    pub fn observe_frame(&mut self, tracks: &mut [Track]) {
        for t in tracks.iter_mut() {
            if t.counted || t.status != TrackStatus::Confirmed || !t.is_observed() {
                continue;
            }
            if crossed_line(t.last_center_y, t.center_y, &self.line, self.frame_height) {
                *self.per_class.entry(t.class_id).or_default() += 1;
                t.counted = true;
                self.counted_ids.push(t.id);
            }
        }
    }

    pub fn finalize(&self, unique_ids: u64, actual_count: Option<i64>) -> Result<CountReport> {
        let total = self.total();
        let accuracy = actual_count.map(|a| accuracy_pct(total, a)).transpose()?;
        Ok(CountReport {
            per_class_counts: self.per_class.clone(),
            total_count: total,
            unique_ids,
            actual_count: actual_count.map(|a| a as u64),
            accuracy_pct: accuracy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;
    use crate::kalman::{initiate, NoiseConfig};

    fn track(id: u64, prev: f64, curr: f64) -> Track {
        let b = BBox::new(0.0, curr - 5.0, 10.0, 10.0).unwrap();
        Track {
            id,
            state: initiate(&b, &NoiseConfig::default()),
            embedding: None,
            status: TrackStatus::Confirmed,
            frames_since_update: 0,
            hits: 5,
            class_id: 0,
            last_center_y: prev,
            center_y: curr,
            counted: false,
            first_frame: 0,
            last_frame: 0,
        }
    }

    fn counter() -> LineCounter {
        LineCounter::new(RoILine::new(0.5).unwrap(), 200.0)
    }

    #[test]
    fn counts_once_per_id() {
        let mut c = counter();
        let mut ts = vec![track(1, 95.0, 105.0)];
        c.observe_frame(&mut ts);
        assert_eq!(c.total(), 1);
        for k in 0..50 {
            let y = 105.0 + k as f64;
            ts[0].last_center_y = y;
            ts[0].center_y = y + 1.0;
            c.observe_frame(&mut ts);
        }
        // bouncing back above and crossing again still counts once
        ts[0].last_center_y = 90.0;
        ts[0].center_y = 110.0;
        c.observe_frame(&mut ts);
        assert_eq!(c.total(), 1);
    }

    #[test]
    fn no_tracks_no_change() {
        let mut c = counter();
        c.observe_frame(&mut []);
        assert_eq!(c.total(), 0);
    }

    #[test]
    fn simultaneous_crossings() {
        let mut c = counter();
        let mut ts = vec![track(1, 95.0, 105.0), track(2, 99.0, 100.0)];
        c.observe_frame(&mut ts);
        assert_eq!(c.total(), 2);
        assert_eq!(c.counted_ids(), &[1, 2]);
    }

    #[test]
    fn only_confirmed_observed_tracks_count() {
        let mut c = counter();
        let mut ts = vec![track(1, 95.0, 105.0), track(2, 95.0, 105.0)];
        ts[0].status = TrackStatus::Tentative;
        ts[1].frames_since_update = 1;
        c.observe_frame(&mut ts);
        assert_eq!(c.total(), 0);
    }

    #[test]
    fn per_class_totals() {
        let mut c = counter();
        let mut ts = vec![track(1, 95.0, 105.0), track(2, 95.0, 105.0), track(3, 95.0, 105.0)];
        ts[2].class_id = 1;
        c.observe_frame(&mut ts);
        let r = c.finalize(3, None).unwrap();
        assert_eq!(r.per_class_counts[&0], 2);
        assert_eq!(r.per_class_counts[&1], 1);
        assert_eq!(r.total_count, 3);
        assert_eq!(r.accuracy_pct, None);
    }

    #[test]
    fn accuracy_values() {
        assert_eq!(format!("{:.1}", accuracy_pct(238, 250).unwrap()), "95.2");
        assert_eq!(format!("{:.1}", accuracy_pct(242, 250).unwrap()), "96.8");
        assert_eq!(accuracy_pct(0, 250).unwrap(), 0.0);
        assert!(matches!(accuracy_pct(3, 0), Err(Error::ZeroActualCount(0))));
        assert!(counter().finalize(0, Some(0)).is_err());
        let r = counter().finalize(0, Some(250)).unwrap();
        assert_eq!(r.accuracy_pct, Some(0.0));
    }
}
