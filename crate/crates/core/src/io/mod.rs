//! File formats at the tool boundary: binary PLY checkpoints, camera JSON,
//! 8-bit RGB PNG images, and CSV/JSON experiment tables. Every error names
//! the offending file.

mod cameras;
mod images;
mod ply;
mod tables;

pub use cameras::{
    load_ground_truth, read_cameras, write_cameras, CameraFileEntry,
};
pub use images::{quantized_color, read_image, write_image};
pub use ply::{ply_property_names, read_ply, write_ply, PLY_PROPERTY_COUNT, PLY_VERTEX_BYTES};
pub use tables::{
    append_sweep_row, read_mask, read_ranked, read_report_csv, read_score_table, read_streams,
    read_sweep, write_mask, write_ranked, write_report, write_score_table, write_streams,
    ReportFormat, ReportRow, ScoreSidecar, SweepRow,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: header line {line}: {message}")]
    MalformedHeader {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: unsupported encoding '{found}' (expected binary_little_endian 1.0)")]
    UnsupportedEncoding { path: PathBuf, found: String },
    #[error("{path}: property {index} is '{found}', expected '{expected}'")]
    PropertyOrderMismatch {
        path: PathBuf,
        index: usize,
        expected: String,
        found: String,
    },
    #[error("{path}: payload holds {found} bytes, expected {expected}")]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{path}: {extra} trailing bytes after the vertex payload")]
    TrailingBytes { path: PathBuf, extra: usize },
    #[error("{path}: {source}")]
    InvalidPrimitive { path: PathBuf, source: ModelError },
    #[error("{path}: camera {index}: {message}")]
    Camera {
        path: PathBuf,
        index: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    ImageFormat { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Table { path: PathBuf, message: String },
}

impl IoError {
    fn file(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::File { path, source }
    }

    fn json(path: impl Into<PathBuf>) -> impl FnOnce(serde_json::Error) -> Self {
        let path = path.into();
        move |source| Self::Json { path, source }
    }

    fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> Self {
        let path = path.into();
        move |source| Self::Csv { path, source }
    }
}
