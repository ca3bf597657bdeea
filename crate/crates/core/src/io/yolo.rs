//! YOLO TXT annotations: one `class_id cx cy w h` line per object, geometry
//! normalized by image size with six decimals.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::BBox;

#[derive(Debug, Clone, PartialEq)]
pub struct YoloObject {
    pub class_id: u32,
    pub bbox: BBox,
}

pub fn format_annotation(objects: &[YoloObject], image_w: u32, image_h: u32) -> Result<String> {
    let (w, h) = (f64::from(image_w), f64::from(image_h));
    let mut out = String::new();
    for o in objects {
        if !o.bbox.contained_in(w, h) {
            return Err(Error::OutOfBounds(o.bbox.to_string(), image_w, image_h));
        }
        let [cx, cy, bw, bh] = o.bbox.to_normalized_cxcywh(w, h);
        writeln!(out, "{} {cx:.6} {cy:.6} {bw:.6} {bh:.6}", o.class_id).expect("string write");
    }
    Ok(out)
}

pub fn write_yolo_annotation(objects: &[YoloObject], image_w: u32, image_h: u32, path: &Path) -> Result<()> {
    fs::write(path, format_annotation(objects, image_w, image_h)?)?;
    Ok(())
}

pub fn parse_annotation(text: &str, image_w: u32, image_h: u32, path: &Path) -> Result<Vec<YoloObject>> {
    let (w, h) = (f64::from(image_w), f64::from(image_h));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", f.len())));
        }
        let class_id: u32 = f[0].parse().map_err(|_| err(format!("bad class id {:?}", f[0])))?;
        let mut g = [0.0f64; 4];
        for (k, v) in g.iter_mut().enumerate() {
            *v = f[k + 1]
                .parse()
                .map_err(|_| err(format!("bad number {:?}", f[k + 1])))?;
            if !(0.0..=1.0).contains(v) {
                return Err(err(format!("normalized value {v} outside [0, 1]")));
            }
        }
        let [cx, cy, bw, bh] = g;
        let bbox = BBox::new((cx - bw / 2.0) * w, (cy - bh / 2.0) * h, bw * w, bh * h)
            .map_err(|e| err(e.to_string()))?;
        out.push(YoloObject { class_id, bbox });
    }
    Ok(out)
}

pub fn read_yolo_annotation(path: &Path, image_w: u32, image_h: u32) -> Result<Vec<YoloObject>> {
    parse_annotation(&fs::read_to_string(path)?, image_w, image_h, path)
}
