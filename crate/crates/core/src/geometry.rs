//! Boxes, detections, and the counting line.
//!
//! Boxes are stored as `(x_min, y_min, width, height)` in continuous pixel
//! coordinates. Center and normalized forms are produced by explicit
//! conversions.

use std::fmt;

use crate::error::{Error, Result};

/// Axis-aligned box with strictly positive extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    width: f64,
    height: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, width: f64, height: f64) -> Result<Self> {
        if ![x_min, y_min, width, height].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite component in ({x_min}, {y_min}, {width}, {height})"
            )));
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "width and height must be positive, got {width}x{height}"
            )));
        }
        Ok(BBox {
            x_min,
            y_min,
            width,
            height,
        })
    }

    /// Builds a box from center coordinates, aspect ratio (width / height) and height.
    pub fn from_xyah(cx: f64, cy: f64, aspect: f64, height: f64) -> Result<Self> {
        let width = aspect * height;
        BBox::new(cx - width / 2.0, cy - height / 2.0, width, height)
    }

    pub fn from_corners(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        BBox::new(x_min, y_min, x_max - x_min, y_max - y_min)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.width
    }

    pub fn y_max(&self) -> f64 {
        self.y_min + self.height
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x_min + self.width / 2.0,
            self.y_min + self.height / 2.0,
        )
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// `[cx, cy, width / height, height]`, the Kalman measurement space.
    pub fn to_xyah(&self) -> [f64; 4] {
        let (cx, cy) = self.center();
        [cx, cy, self.width / self.height, self.height]
    }

    /// `(cx, cy, w, h)` normalized by the image size.
    pub fn to_normalized_cxcywh(&self, image_w: f64, image_h: f64) -> [f64; 4] {
        let (cx, cy) = self.center();
        [
            cx / image_w,
            cy / image_h,
            self.width / image_w,
            self.height / image_h,
        ]
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        BBox {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            ..*self
        }
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max().min(other.x_max()) - self.x_min.max(other.x_min);
        let h = self.y_max().min(other.y_max()) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Smallest box containing both.
    pub fn union_box(&self, other: &BBox) -> BBox {
        let x0 = self.x_min.min(other.x_min);
        let y0 = self.y_min.min(other.y_min);
        let x1 = self.x_max().max(other.x_max());
        let y1 = self.y_max().max(other.y_max());
        BBox {
            x_min: x0,
            y_min: y0,
            width: x1 - x0,
            height: y1 - y0,
        }
    }

    pub fn contained_in(&self, w: f64, h: f64) -> bool {
        self.x_min >= 0.0 && self.y_min >= 0.0 && self.x_max() <= w && self.y_max() <= h
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {})",
            self.x_min, self.y_min, self.width, self.height
        )
    }
}

/// Intersection over union. Zero for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0.0 {
        return 0.0;
    }
    let corner_area = |b: &BBox| (b.x_max() - b.x_min) * (b.y_max() - b.y_min);
    let union = corner_area(a) + corner_area(b) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// A single detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    confidence: f64,
    pub class_id: u32,
    embedding: Option<Vec<f32>>,
}

pub const EMBEDDING_NORM_TOL: f64 = 1e-6;

impl Detection {
    pub fn new(bbox: BBox, confidence: f64, class_id: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidDetection(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Detection {
            bbox,
            confidence,
            class_id,
            embedding: None,
        })
    }

    /// Attaches an appearance embedding, normalizing it to unit length.
    pub fn with_embedding(mut self, embedding: Vec<f32>) -> Result<Self> {
        self.embedding = Some(normalize(embedding)?);
        Ok(self)
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn embedding(&self) -> Option<&[f32]> {
        self.embedding.as_deref()
    }
}

/// L2-normalizes a vector. Zero or non-finite vectors are rejected.
pub fn normalize(mut v: Vec<f32>) -> Result<Vec<f32>> {
    let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::InvalidDetection(
            "embedding must be finite and non-zero".into(),
        ));
    }
    for x in &mut v {
        *x = (f64::from(*x) / norm) as f32;
    }
    Ok(v)
}

/// Detections of one video frame. `frame_index` is zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub frame_index: u64,
    pub timestamp_s: f64,
    pub detections: Vec<Detection>,
}

impl FrameDetections {
    pub fn new(frame_index: u64, fps: f64, detections: Vec<Detection>) -> Self {
        FrameDetections {
            frame_index,
            timestamp_s: frame_index as f64 / fps,
            detections,
        }
    }
}

/// Time-ordered frames at a fixed frame rate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionStream {
    pub fps: f64,
    pub frames: Vec<FrameDetections>,
}

impl DetectionStream {
    pub fn new(fps: f64) -> Self {
        DetectionStream {
            fps,
            frames: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn detection_count(&self) -> usize {
        self.frames.iter().map(|f| f.detections.len()).sum()
    }
}

/// Horizontal counting line. Objects are counted when their center moves
/// downward (increasing y) across it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoILine {
    position_norm: f64,
}

impl RoILine {
    pub const DEFAULT_POSITION: f64 = 0.75;

    pub fn new(position_norm: f64) -> Result<Self> {
        if !(position_norm > 0.0 && position_norm < 1.0) {
            return Err(Error::config(
                "line_position",
                format!("must lie strictly inside (0, 1), got {position_norm}"),
            ));
        }
        Ok(RoILine { position_norm })
    }

    pub fn position_norm(&self) -> f64 {
        self.position_norm
    }

    pub fn y_px(&self, frame_height: f64) -> f64 {
        self.position_norm * frame_height
    }
}

impl Default for RoILine {
    fn default() -> Self {
        RoILine {
            position_norm: Self::DEFAULT_POSITION,
        }
    }
}

/// True when a center moved from strictly above the line to on-or-below it.
pub fn crossed_line(prev_center_y: f64, curr_center_y: f64, line: &RoILine, frame_height: f64) -> bool {
    let y = line.y_px(frame_height);
    prev_center_y < y && y <= curr_center_y
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn iou_cases() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(10.0, 10.0, 2.0, 2.0)), 0.0);
        assert!((iou(&a, &bb(1.0, 1.0, 2.0, 2.0)) - 1.0 / 7.0).abs() < 1e-15);
        // touching edges do not intersect
        assert_eq!(iou(&a, &bb(2.0, 0.0, 2.0, 2.0)), 0.0);
    }

    #[test]
    fn rejects_degenerate_boxes() {
        assert!(BBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(BBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
        assert!(BBox::new(0.0, f64::INFINITY, 1.0, 1.0).is_err());
    }

    #[test]
    fn detection_confidence_range() {
        let b = bb(0.0, 0.0, 1.0, 1.0);
        assert!(Detection::new(b, 1.2, 0).is_err());
        assert!(Detection::new(b, -0.1, 0).is_err());
        assert!(Detection::new(b, 0.0, 0).is_ok());
    }

    #[test]
    fn embedding_is_normalized() {
        let d = Detection::new(bb(0.0, 0.0, 1.0, 1.0), 0.5, 0)
            .unwrap()
            .with_embedding(vec![3.0, 4.0])
            .unwrap();
        let n: f64 = d.embedding().unwrap().iter().map(|x| f64::from(*x).powi(2)).sum();
        assert!((n.sqrt() - 1.0).abs() <= EMBEDDING_NORM_TOL);
        assert!(Detection::new(bb(0.0, 0.0, 1.0, 1.0), 0.5, 0)
            .unwrap()
            .with_embedding(vec![0.0, 0.0])
            .is_err());
    }

    #[test]
    fn xyah_round_trip() {
        let b = bb(8.0, 18.0, 4.0, 4.0);
        let [cx, cy, a, h] = b.to_xyah();
        assert_eq!([cx, cy, a, h], [10.0, 20.0, 1.0, 4.0]);
        assert_eq!(BBox::from_xyah(cx, cy, a, h).unwrap(), b);
    }

    #[test]
    fn line_crossing_cases() {
        let line = RoILine::new(0.5).unwrap();
        assert!(crossed_line(90.0, 110.0, &line, 200.0));
        assert!(!crossed_line(110.0, 90.0, &line, 200.0));
        assert!(!crossed_line(100.0, 100.0, &line, 200.0));
        assert!(crossed_line(99.0, 100.0, &line, 200.0));
    }

    #[test]
    fn line_position_bounds() {
        assert!(RoILine::new(0.0).is_err());
        assert!(RoILine::new(1.0).is_err());
        assert!(RoILine::new(f64::NAN).is_err());
        assert_eq!(RoILine::default().position_norm(), 0.75);
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-100.0..100.0f64, -100.0..100.0f64, 0.1..50.0f64, 0.1..50.0f64)
            .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h).unwrap())
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn iou_translation_invariant(a in arb_box(), b in arb_box(), dx in -500.0..500.0f64, dy in -500.0..500.0f64) {
            let moved = iou(&a.translated(dx, dy), &b.translated(dx, dy));
            prop_assert!((moved - iou(&a, &b)).abs() <= 1e-12);
        }

        #[test]
        fn monotone_trajectory_crosses_once(start in 0.0..50.0f64, step in 0.1..20.0f64, pos in 0.3..0.7f64) {
            let line = RoILine::new(pos).unwrap();
            let ys: Vec<f64> = (0..100).map(|i| start + step * i as f64).collect();
            let crossings = ys.windows(2).filter(|w| crossed_line(w[0], w[1], &line, 100.0)).count();
            let expected = usize::from(ys[0] < line.y_px(100.0) && *ys.last().unwrap() >= line.y_px(100.0));
            prop_assert_eq!(crossings, expected);
        }
    }
}
