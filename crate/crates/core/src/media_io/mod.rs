//! Frame and audio ingestion, face crops, reference-frame pairing and
//! dataset splits.

mod dataset;
mod image;
mod pairs;
mod wav;

use std::path::PathBuf;

use thiserror::Error;

pub use self::dataset::{
    frame_file_name, load_bboxes, split_dataset, CorpusManifest, DatasetSplit, ManifestEntry,
    PerSpeakerCounts, SplitRole,
};
pub use self::image::{crop_and_resize, load_frame, BoundingBox, ImageTensor};
pub use self::pairs::{
    make_frame_pairs, plan_frame_shifts, resolve_shift, FramePair, MAX_FRAME_SHIFT,
};
pub use self::wav::{load_wav, write_wav};

use crate::melspec::MelError;

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("cannot read {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("{path}: unsupported format ({format})")]
    UnsupportedFormat { path: PathBuf, format: String },
    #[error("{path}: sample rate {found} Hz, expected {expected} Hz")]
    SampleRateMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("bounding box {bbox:?} exceeds {width}x{height} image")]
    BoxOutOfBounds {
        bbox: BoundingBox,
        width: usize,
        height: usize,
    },
    #[error("degenerate bounding box {0:?}")]
    DegenerateBox(BoundingBox),
    #[error("empty frame list")]
    EmptyFrames,
    #[error("speaker {speaker} has {have} videos, needs {need}")]
    TooFewVideos {
        speaker: String,
        have: usize,
        need: usize,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Audio(#[from] MelError),
    #[error(transparent)]
    Image(#[from] ::image::ImageError),
    #[error(transparent)]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
