//! Experiment harness around `ganlip-core`: preprocessing into an on-disk
//! store, toy training, evaluation and report tables.

mod error;
pub mod evaluate;
pub mod preprocess;
pub mod report;
pub mod store;
pub mod train;

pub use error::CliError;
