//! Image-quality and distribution metrics: PSNR, SSIM, the Fréchet
//! distance behind FID, and boxplot-style summaries.

mod frechet;
mod quality;
mod summary;

pub use frechet::{
    frechet_distance, gaussian_stats, matrix_sqrt_psd, EmbeddingSet, GaussianStats, ToyEmbedder,
    SYMMETRY_TOL,
};
pub use quality::{mse, psnr, ssim, SsimParams};
pub use summary::{partition_finite, quantile, summarize, MetricsSummary, FENCE_IQR};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("dimension mismatch: {lhs} vs {rhs}")]
    DimensionMismatch { lhs: String, rhs: String },
    #[error("{height}x{width} image is smaller than the {window}x{window} window")]
    ImageTooSmall {
        height: usize,
        width: usize,
        window: usize,
    },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("matrix asymmetric by {0:e}")]
    NotSymmetric(f64),
    #[error("non-finite value")]
    NonFinite,
    #[error("empty input")]
    EmptyInput,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed embedding data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
