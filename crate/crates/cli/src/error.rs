use std::fmt;

use ganlip_core::autodiff::AutodiffError;
use ganlip_core::gan::GanError;
use ganlip_core::media_io::MediaError;
use ganlip_core::melspec::MelError;
use ganlip_core::metrics::MetricsError;

/// Failure of a command, split by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or input data (exit code 2).
    Usage(String),
    /// Numeric or internal failure (exit code 1).
    Internal(String),
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self::Usage(msg.to_string())
    }

    pub fn internal(msg: impl fmt::Display) -> Self {
        Self::Internal(msg.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Internal(_) => 1,
        }
    }

    /// Prefixes the message with `what`.
    pub fn context(self, what: impl fmt::Display) -> Self {
        match self {
            Self::Usage(m) => Self::Usage(format!("{what}: {m}")),
            Self::Internal(m) => Self::Internal(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) | Self::Internal(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<GanError> for CliError {
    fn from(e: GanError) -> Self {
        match e {
            GanError::NonFiniteLoss { .. }
            | GanError::NonFiniteGradient
            | GanError::Autodiff(_) => Self::internal(e),
            GanError::Metrics(m) => m.into(),
            _ => Self::usage(e),
        }
    }
}

impl From<MediaError> for CliError {
    fn from(e: MediaError) -> Self {
        Self::usage(e)
    }
}

impl From<MelError> for CliError {
    fn from(e: MelError) -> Self {
        Self::usage(e)
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::NonFinite | MetricsError::NotSymmetric(_) => Self::internal(e),
            _ => Self::usage(e),
        }
    }
}

impl From<AutodiffError> for CliError {
    fn from(e: AutodiffError) -> Self {
        Self::internal(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::usage(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(e)
    }
}
