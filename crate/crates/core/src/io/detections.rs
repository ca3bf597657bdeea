//! `frame,track_id,x_min,y_min,width,height,confidence,class_id` text records.
//!
//! `track_id` is -1 for raw detections. Floats are written with six decimals
//! so output is byte-stable across runs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{BBox, Detection, DetectionStream, FrameDetections};
use crate::pipeline::TrackedBox;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    /// 1-based frame number as stored in the file.
    pub frame: u64,
    pub track_id: i64,
    pub bbox: BBox,
    pub confidence: f64,
    pub class_id: u32,
}

impl DetectionRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            self.frame,
            self.track_id,
            self.bbox.x_min(),
            self.bbox.y_min(),
            self.bbox.width(),
            self.bbox.height(),
            self.confidence,
            self.class_id
        )
    }

    pub fn parse(line: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(format!("expected 8 comma-separated fields, found {}", fields.len()));
        }
        let float = |i: usize, name: &str| -> std::result::Result<f64, String> {
            let v: f64 = fields[i]
                .parse()
                .map_err(|_| format!("{name}: cannot parse {:?}", fields[i]))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("{name}: non-finite value {:?}", fields[i]))
            }
        };
        let frame: u64 = fields[0]
            .parse()
            .map_err(|_| format!("frame: cannot parse {:?}", fields[0]))?;
        if frame < 1 {
            return Err("frame numbers start at 1".into());
        }
        let track_id: i64 = fields[1]
            .parse()
            .map_err(|_| format!("track_id: cannot parse {:?}", fields[1]))?;
        let bbox = BBox::new(
            float(2, "x_min")?,
            float(3, "y_min")?,
            float(4, "width")?,
            float(5, "height")?,
        )
        .map_err(|e| e.to_string())?;
        let confidence = float(6, "confidence")?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(format!("confidence {confidence} outside [0, 1]"));
        }
        let class_id: u32 = fields[7]
            .parse()
            .map_err(|_| format!("class_id: cannot parse {:?}", fields[7]))?;
        Ok(DetectionRecord {
            frame,
            track_id,
            bbox,
            confidence,
            class_id,
        })
    }
}

/// Reads every record, checking that frame numbers never decrease.
pub fn read_records(path: &Path) -> Result<Vec<DetectionRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    let mut last_frame = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let rec = DetectionRecord::parse(line).map_err(parse_err)?;
        if rec.frame < last_frame {
            return Err(parse_err(format!(
                "frame {} follows frame {last_frame}; frames must not decrease",
                rec.frame
            )));
        }
        last_frame = rec.frame;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<'a>(path: &Path, records: impl IntoIterator<Item = &'a DetectionRecord>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        writeln!(w, "{}", r.to_line())?;
    }
    w.flush()?;
    Ok(())
}

/// Groups records into frames. Frames missing from the file become empty
/// frames up to the last frame present.
pub fn records_to_stream(records: &[DetectionRecord], fps: f64) -> Result<DetectionStream> {
    let mut stream = DetectionStream::new(fps);
    let Some(last) = records.last() else {
        return Ok(stream);
    };
    stream.frames = (0..last.frame)
        .map(|i| FrameDetections::new(i, fps, Vec::new()))
        .collect();
    for r in records {
        let det = Detection::new(r.bbox, r.confidence, r.class_id)?;
        stream.frames[(r.frame - 1) as usize].detections.push(det);
    }
    Ok(stream)
}

pub fn read_detection_stream(path: &Path, fps: f64) -> Result<DetectionStream> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::config("fps", format!("must be positive, got {fps}")));
    }
    records_to_stream(&read_records(path)?, fps)
}

pub fn stream_records(stream: &DetectionStream) -> Vec<DetectionRecord> {
    stream
        .frames
        .iter()
        .flat_map(|f| {
            f.detections.iter().map(move |d| DetectionRecord {
                frame: f.frame_index + 1,
                track_id: -1,
                bbox: d.bbox,
                confidence: d.confidence(),
                class_id: d.class_id,
            })
        })
        .collect()
}

pub fn write_detection_stream(path: &Path, stream: &DetectionStream) -> Result<()> {
    write_records(path, &stream_records(stream))
}

/// Writes tracker output; confidence is written as 1.
pub fn write_tracks(path: &Path, tracked: &[TrackedBox]) -> Result<()> {
    let records: Vec<DetectionRecord> = tracked
        .iter()
        .map(|t| DetectionRecord {
            frame: t.frame_index + 1,
            track_id: t.track_id as i64,
            bbox: t.bbox,
            confidence: 1.0,
            class_id: t.class_id,
        })
        .collect();
    write_records(path, &records)
}
