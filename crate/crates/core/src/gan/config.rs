use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GanError;

/// Where the gradient penalty evaluates the critic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpInputMode {
    /// `ε·real + (1−ε)·fake` with `ε ~ U[0,1]` per sample.
    Interpolated,
    /// The generator output itself.
    GeneratorOutput,
}

impl std::str::FromStr for GpInputMode {
    type Err = GanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interp" | "interpolated" => Ok(Self::Interpolated),
            "gen" | "generator_output" => Ok(Self::GeneratorOutput),
            other => Err(GanError::InvalidConfig(format!(
                "unknown gp mode {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Critic updates per generator update (L1WGAN-GP).
    pub n_critic: usize,
    pub lambda_gp: f64,
    pub seed: u64,
    /// Iterations between sample-grid snapshots; 0 disables them.
    pub sample_every: usize,
    pub loss_log_every: usize,
    pub gp_input_mode: GpInputMode,
    /// Weight of the L1 term in the Wasserstein generator loss.
    pub l1_weight: f64,
    /// Weight of the adversarial term in the LipGAN generator loss.
    pub adv_weight: f64,
    /// Hidden width of both toy networks.
    pub hidden: usize,
    /// Stops after this many iterations instead of `epochs` full passes.
    pub max_iters: Option<usize>,
    /// Pairs used for the SSIM/PSNR columns of the log and for sample grids.
    pub n_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.5,
            beta2: 0.9,
            batch_size: 128,
            epochs: 20,
            n_critic: 5,
            lambda_gp: 10.0,
            seed: 10,
            sample_every: 0,
            loss_log_every: 600,
            gp_input_mode: GpInputMode::Interpolated,
            l1_weight: 1.0,
            adv_weight: 1.0,
            hidden: 256,
            max_iters: None,
            n_samples: 20,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GanError> {
        let bad = |m: &str| Err(GanError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if self.batch_size == 0
            || self.n_critic == 0
            || self.loss_log_every == 0
            || self.hidden == 0
        {
            return bad("batch_size, n_critic, loss_log_every and hidden must be positive");
        }
        if self.lambda_gp.is_nan() || self.lambda_gp < 0.0 {
            return bad("lambda_gp must be non-negative");
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GanError> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| GanError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Seeds of the independent random streams, derived from `seed` by fixed
    /// offsets.
    pub fn stream_seed(&self, stream: SeedStream) -> u64 {
        self.seed.wrapping_add(stream as u64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedStream {
    GeneratorInit = 1,
    DiscriminatorInit = 2,
    Shuffle = 3,
    Penalty = 4,
    Pairs = 5,
}
