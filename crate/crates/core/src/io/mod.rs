//! File formats: detection/track text streams, the binary embedding sidecar,
//! YOLO TXT annotations, and key=value configuration files.
//!
//! Frame numbers are 1-based in files and 0-based in memory; the conversion
//! happens only in this module.

pub mod detections;
pub mod embeddings;
pub mod kv;
pub mod yolo;

pub use detections::{
    read_detection_stream, read_records, write_detection_stream, write_records, write_tracks,
    DetectionRecord,
};
pub use embeddings::{attach_embeddings, read_embeddings, write_embeddings, EmbeddingRecord};
pub use yolo::{read_yolo_annotation, write_yolo_annotation, YoloObject};
