//! Detection metrics (precision, recall, AP at IoU 0.5) and counting rows.
//!
//! Predictions are matched greedily in descending confidence; AP uses
//! all-point interpolation of the precision-recall curve.

use std::fmt::Write as _;

use crate::counting::accuracy_pct;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, Detection};

/// Outcome of matching one image's predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMatches {
    /// `(confidence, is_true_positive)` per prediction, in input order.
    pub scored: Vec<(f64, bool)>,
    pub n_gt: usize,
}

impl ImageMatches {
    pub fn tp(&self) -> usize {
        self.scored.iter().filter(|(_, tp)| *tp).count()
    }

    pub fn fp(&self) -> usize {
        self.scored.len() - self.tp()
    }

    pub fn fn_(&self) -> usize {
        self.n_gt - self.tp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEvalResult {
    pub precision: f64,
    pub recall: f64,
    pub ap50: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Greedy matching: each prediction, highest confidence first, claims its
/// best-IoU unmatched ground-truth box if that IoU reaches the threshold.
pub fn match_detections(preds: &[Detection], gts: &[BBox], iou_threshold: f64) -> ImageMatches {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].confidence().total_cmp(&preds[a].confidence()));
    let mut taken = vec![false; gts.len()];
    let mut is_tp = vec![false; preds.len()];
    for p in order {
        let best = (0..gts.len())
            .filter(|&g| !taken[g])
            .map(|g| (g, iou(&preds[p].bbox, &gts[g])))
            .fold(None, |acc: Option<(usize, f64)>, (g, v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((g, v)),
            });
        if let Some((g, v)) = best {
            if v >= iou_threshold {
                taken[g] = true;
                is_tp[p] = true;
            }
        }
    }
    ImageMatches {
        scored: preds.iter().zip(is_tp).map(|(d, tp)| (d.confidence(), tp)).collect(),
        n_gt: gts.len(),
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision(tp: usize, fp: usize) -> f64 {
    ratio(tp, tp + fp)
}

pub fn recall(tp: usize, fn_: usize) -> f64 {
    ratio(tp, tp + fn_)
}

/// Area under the all-point interpolated precision-recall curve.
pub fn average_precision_50(images: &[ImageMatches]) -> Result<f64> {
    let n_gt: usize = images.iter().map(|m| m.n_gt).sum();
    if n_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut scored: Vec<(f64, bool)> = images.iter().flat_map(|m| m.scored.iter().copied()).collect();
    // stable: equal confidences keep input order
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut tp = 0usize;
    let mut points = Vec::with_capacity(scored.len());
    for (k, (_, hit)) in scored.iter().enumerate() {
        tp += usize::from(*hit);
        points.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
    }
    // precision envelope from the right
    for k in (0..points.len().saturating_sub(1)).rev() {
        points[k].1 = points[k].1.max(points[k + 1].1);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in points {
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    Ok(ap)
}

pub fn evaluate(images: &[ImageMatches]) -> DetectionEvalResult {
    let tp = images.iter().map(ImageMatches::tp).sum();
    let fp = images.iter().map(ImageMatches::fp).sum();
    let fn_ = images.iter().map(ImageMatches::fn_).sum();
    DetectionEvalResult {
        precision: precision(tp, fp),
        recall: recall(tp, fn_),
        ap50: average_precision_50(images).ok(),
        tp,
        fp,
        fn_,
    }
}

/// One row of a counting results table: label, frame rate, actual count,
/// counted, accuracy to one decimal.
pub fn counting_row(label: &str, fps: f64, count: u64, actual: i64, unique_ids: u64) -> Result<String> {
    let acc = accuracy_pct(count, actual)?;
    Ok(format!(
        "| {label:<10} | {fps:>10} | {actual:>12} | {count:>11} | {acc:>8.1} | {unique_ids:>10} |"
    ))
}

pub fn counting_header() -> String {
    format!(
        "| {:<10} | {:>10} | {:>12} | {:>11} | {:>8} | {:>10} |",
        "Seed Type", "Frame Rate", "Actual Count", "Count", "Accuracy", "Unique IDs"
    )
}

pub fn detection_table(label: &str, r: &DetectionEvalResult) -> String {
    let pct = |v: f64| format!("{:.1}%", 100.0 * v);
    let mut s = String::new();
    writeln!(
        s,
        "| {:<10} | {:>9} | {:>9} | {:>9} |",
        "Seed Type", "Precision", "Recall", "AP50"
    )
    .expect("string write");
    writeln!(
        s,
        "| {:<10} | {:>9} | {:>9} | {:>9} |",
        label,
        pct(r.precision),
        pct(r.recall),
        r.ap50.map_or_else(|| "n/a".to_string(), pct)
    )
    .expect("string write");
    s
}

/// `key=value` summary line for scripts.
pub fn detection_summary(r: &DetectionEvalResult) -> String {
    format!(
        "precision={} recall={} ap50={} tp={} fp={} fn={}",
        r.precision,
        r.recall,
        r.ap50.map_or_else(|| "na".to_string(), |v| v.to_string()),
        r.tp,
        r.fp,
        r.fn_
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: f64, conf: f64) -> Detection {
        Detection::new(BBox::new(x, 0.0, 10.0, 10.0).unwrap(), conf, 0).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let gts: Vec<BBox> = (0..5).map(|i| BBox::new(20.0 * i as f64, 0.0, 10.0, 10.0).unwrap()).collect();
        let preds: Vec<Detection> = gts.iter().map(|b| Detection::new(*b, 0.9, 0).unwrap()).collect();
        let m = match_detections(&preds, &gts, 0.5);
        assert_eq!((m.tp(), m.fp(), m.fn_()), (5, 0, 0));
        let r = evaluate(&[m]);
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.recall, 1.0);
        assert_eq!(r.ap50, Some(1.0));
    }

    #[test]
    fn no_predictions() {
        let gts = vec![BBox::new(0.0, 0.0, 1.0, 1.0).unwrap(); 3];
        let m = match_detections(&[], &gts, 0.5);
        assert_eq!((m.tp(), m.fp(), m.fn_()), (0, 0, 3));
        assert_eq!(average_precision_50(&[m]).unwrap(), 0.0);
    }

    #[test]
    fn greedy_prefers_confident_prediction() {
        let gts = vec![BBox::new(0.0, 0.0, 10.0, 10.0).unwrap()];
        let preds = vec![det(1.0, 0.6), det(0.0, 0.9)];
        let m = match_detections(&preds, &gts, 0.5);
        assert_eq!(m.scored, vec![(0.6, false), (0.9, true)]);
    }

    #[test]
    fn ratio_fixture() {
        assert_eq!(precision(46, 4), 0.92);
        assert_eq!(recall(46, 4), 0.92);
        assert_eq!(precision(0, 0), 0.0);
    }

    #[test]
    fn ap_requires_ground_truth() {
        assert!(matches!(
            average_precision_50(&[ImageMatches { scored: vec![(0.5, false)], n_gt: 0 }]),
            Err(Error::NoGroundTruth)
        ));
    }

    #[test]
    fn counting_rows() {
        let row = counting_row("Soy", 120.0, 238, 250, 250).unwrap();
        assert!(row.contains(" 95.2 "), "{row}");
        assert!(counting_row("Wheat", 120.0, 233, 250, 0).unwrap().contains(" 93.2 "));
        assert!(counting_row("Wheat", 30.0, 171, 250, 0).unwrap().contains(" 68.4 "));
        assert!(counting_row("x", 30.0, 250, 250, 0).unwrap().contains(" 100.0 "));
        assert!(counting_row("x", 30.0, 1, 0, 0).is_err());
        assert!(counting_row("x", 30.0, 1, -3, 0).is_err());
    }
}
