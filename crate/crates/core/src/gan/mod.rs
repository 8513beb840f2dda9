//! Losses, optimizer, toy conditional models and the two training
//! protocols (LipGAN-style BCE and L1 + Wasserstein with gradient penalty).

mod adam;
mod checkpoint;
mod config;
mod losses;
mod model;
mod penalty;
mod toy;
mod train;

pub use adam::{Adam, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use config::{GpInputMode, SeedStream, TrainConfig};
pub use losses::{
    bce, l1_reconstruction_loss, lipgan_generator_loss, lipgan_losses, wgan_generator_loss,
    wgan_gp_loss, LipGanLosses, PROB_CLAMP,
};
pub use model::{
    audio_row, face_row, generate, Activation, BoundCritic, Critic, Mlp, ToyDiscriminator,
    ToyGenerator, LEAKY_SLOPE,
};
pub use penalty::{gradient_penalty, Penalty};
pub use toy::{make_toy_dataset, write_toy_corpus, ToyConfig, ToyCorpus, ToyVideo};
pub use train::{
    total_iterations, train, train_l1wgan_gp, train_lipgan, Diagnostics, LogRecord, ModelKind,
    TrainLog, TrainOutcome, LOG_HEADER,
};

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::media_io::MediaError;
use crate::melspec::MelError;
use crate::metrics::MetricsError;

#[derive(Debug, Error)]
pub enum GanError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("non-finite loss at iteration {iter}: {detail}")]
    NonFiniteLoss { iter: usize, detail: String },
    #[error("empty training data")]
    EmptyData,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Mel(#[from] MelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
