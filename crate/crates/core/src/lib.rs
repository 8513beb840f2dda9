pub mod autodiff;
pub mod gan;
pub mod media_io;
pub mod melspec;
pub mod metrics;
