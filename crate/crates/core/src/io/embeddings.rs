//! Binary embedding sidecar.
//!
//! Layout, all integers little-endian:
//! `b"GFEMB1"`, `u32` dimension, `u32` record count, then per record
//! `u32` frame (1-based), `u32` ordinal of the detection within its frame,
//! and `dimension` `f32` values.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::DetectionStream;

pub const MAGIC: &[u8; 6] = b"GFEMB1";
pub const NORM_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub frame: u32,
    pub ordinal: u32,
    pub vector: Vec<f32>,
}

pub fn encode(dim: u32, records: &[EmbeddingRecord]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(14 + records.len() * (8 + 4 * dim as usize));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        if r.vector.len() != dim as usize {
            return Err(Error::EmbeddingDim {
                expected: dim as usize,
                got: r.vector.len(),
            });
        }
        out.extend_from_slice(&r.frame.to_le_bytes());
        out.extend_from_slice(&r.ordinal.to_le_bytes());
        for v in &r.vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<(u32, Vec<EmbeddingRecord>)> {
    let fail = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut cursor = bytes;
    let mut take = |n: usize| -> Result<&[u8]> {
        if cursor.len() < n {
            return Err(fail("truncated embedding file".into()));
        }
        let (head, tail) = cursor.split_at(n);
        cursor = tail;
        Ok(head)
    };
    if take(6)? != MAGIC {
        return Err(fail("bad magic, expected GFEMB1".into()));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
    let dim = u32_at(take(4)?);
    let count = u32_at(take(4)?);
    let mut records = Vec::with_capacity(count as usize);
    for i in 0..count {
        let frame = u32_at(take(4)?);
        let ordinal = u32_at(take(4)?);
        let raw = take(4 * dim as usize)?;
        let vector: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if !vector.iter().all(|v| v.is_finite()) {
            return Err(fail(format!("record {i}: non-finite component")));
        }
        let norm = vector.iter().map(|v| f64::from(*v).powi(2)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(fail(format!("record {i}: norm {norm} is not 1")));
        }
        records.push(EmbeddingRecord {
            frame,
            ordinal,
            vector,
        });
    }
    if !cursor.is_empty() {
        return Err(fail(format!(
            "{} trailing bytes after {count} records",
            cursor.len()
        )));
    }
    Ok((dim, records))
}

pub fn write_embeddings(path: &Path, dim: u32, records: &[EmbeddingRecord]) -> Result<()> {
    fs::write(path, encode(dim, records)?)?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<(u32, Vec<EmbeddingRecord>)> {
    decode(&fs::read(path)?, path)
}

/// Embeddings carried by the detections of a stream, keyed by frame and ordinal.
pub fn stream_embeddings(stream: &DetectionStream) -> Vec<EmbeddingRecord> {
    stream
        .frames
        .iter()
        .flat_map(|f| {
            f.detections.iter().enumerate().filter_map(move |(k, d)| {
                d.embedding().map(|e| EmbeddingRecord {
                    frame: (f.frame_index + 1) as u32,
                    ordinal: k as u32,
                    vector: e.to_vec(),
                })
            })
        })
        .collect()
}

/// Attaches sidecar vectors to the matching detections of `stream`.
pub fn attach_embeddings(stream: &mut DetectionStream, records: Vec<EmbeddingRecord>) -> Result<()> {
    for r in records {
        let frame = (r.frame as usize)
            .checked_sub(1)
            .and_then(|i| stream.frames.get_mut(i))
            .ok_or_else(|| {
                Error::InvalidDetection(format!("embedding for frame {} has no detections", r.frame))
            })?;
        let det = frame.detections.get_mut(r.ordinal as usize).ok_or_else(|| {
            Error::InvalidDetection(format!(
                "embedding for frame {} ordinal {} has no matching detection",
                r.frame, r.ordinal
            ))
        })?;
        *det = det.clone().with_embedding(r.vector)?;
    }
    Ok(())
}
