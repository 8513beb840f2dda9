use std::path::{Path, PathBuf};

use ganlip_core::gan::{
    make_toy_dataset, train, Checkpoint, GanError, ModelKind, SeedStream, ToyConfig, ToyGenerator,
    TrainConfig, TrainOutcome,
};
use ganlip_core::media_io::{FramePair, ImageTensor};
use serde::{Deserialize, Serialize};

use crate::store::read_pairs;
use crate::CliError;

/// Training configuration plus the toy-corpus settings, read from one JSON
/// file: `TrainConfig` fields at the top level and an optional `toy` object.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    #[serde(default)]
    pub toy: ToyConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map(Self::load).unwrap_or_else(|| Ok(Self::default()))
    }

    /// The toy corpus follows the root seed.
    pub fn toy_config(&self) -> ToyConfig {
        ToyConfig {
            seed: self.train.seed,
            ..self.toy.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Toy,
    Store(PathBuf),
}

/// Whole videos held out of a toy corpus for evaluation.
pub fn toy_held_out(n_videos: usize) -> usize {
    (n_videos / 5).max(1)
}

/// A frame pair with the id of the video it came from.
pub type TaggedPair = (String, FramePair);

/// Toy pairs tagged with their video id: `(train, held_out)`.
pub fn toy_pairs(cfg: &RunConfig) -> Result<(Vec<TaggedPair>, Vec<TaggedPair>), CliError> {
    use rand::SeedableRng;

    let toy = cfg.toy_config();
    let corpus = make_toy_dataset(&toy)?;
    let n = corpus.videos.len();
    let held = toy_held_out(n);
    if held >= n {
        return Err(CliError::usage("toy corpus needs at least 2 videos"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.train.stream_seed(SeedStream::Pairs));
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for v in 0..n {
        let id = &corpus.videos[v].video_id;
        let pairs = corpus.pairs(v..v + 1, &mut rng)?;
        let dst = if v < n - held { &mut train } else { &mut test };
        dst.extend(pairs.into_iter().map(|p| (id.clone(), p)));
    }
    Ok((train, test))
}

/// Training pairs (toy: the non-held-out videos) or evaluation pairs (toy:
/// the held-out videos). A store directory is used as is.
pub fn load_pairs(
    source: &DataSource,
    cfg: &RunConfig,
    held_out: bool,
) -> Result<Vec<TaggedPair>, CliError> {
    match source {
        DataSource::Toy => {
            let (train, test) = toy_pairs(cfg)?;
            Ok(if held_out { test } else { train })
        }
        DataSource::Store(dir) => read_pairs(dir),
    }
}

/// Generated frames in the top row, ground truth beneath.
pub fn sample_mosaic(g: &ToyGenerator, pairs: &[FramePair]) -> Result<ImageTensor, GanError> {
    let inputs: Vec<_> = pairs.iter().map(|p| (&p.reference, &p.audio)).collect();
    let generated = g.generate_batch(&inputs)?;
    let (h, w, c) = g.image_dims;
    let n = pairs.len();
    let mut data = vec![0.0; 2 * h * n * w * c];
    let row_len = n * w * c;
    for (k, (gen, p)) in generated.iter().zip(pairs).enumerate() {
        for (band, img) in [gen, &p.target].into_iter().enumerate() {
            for y in 0..h {
                let src = &img.data()[y * w * c..(y + 1) * w * c];
                let start = (band * h + y) * row_len + k * w * c;
                data[start..start + w * c].copy_from_slice(src);
            }
        }
    }
    Ok(ImageTensor::new(2 * h, n * w, c, data)?)
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub model: ModelKind,
    pub config: RunConfig,
    pub data: DataSource,
    pub out: PathBuf,
}

pub const LOG_FILE: &str = "train_log.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.ckpt";
pub const CONFIG_FILE: &str = "run_config.json";

/// Trains one model and writes the log, the final checkpoint, the config
/// snapshot and sample mosaics (once per epoch unless `sample_every` is set).
pub fn cmd_train(opts: &TrainOptions) -> Result<TrainOutcome, CliError> {
    let mut cfg = opts.config.train.clone();
    cfg.validate()?;
    let pairs: Vec<FramePair> = load_pairs(&opts.data, &opts.config, false)?
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    if pairs.is_empty() {
        return Err(CliError::usage("no training pairs"));
    }
    if cfg.sample_every == 0 {
        cfg.sample_every = pairs.len().div_ceil(cfg.batch_size);
    }
    let samples_dir = opts.out.join("samples");
    std::fs::create_dir_all(&samples_dir)?;
    let snapshot = serde_json::json!({
        "model": opts.model.to_string(),
        "data": opts.data,
        "config": RunConfig { train: opts.config.train.clone(), toy: opts.config.toy_config() },
    });
    std::fs::write(
        opts.out.join(CONFIG_FILE),
        serde_json::to_string_pretty(&snapshot)? + "\n",
    )?;

    let sample_pairs = &pairs[..cfg.n_samples.clamp(1, pairs.len())];
    let outcome = train(opts.model, &cfg, &pairs, &mut |iter, g| {
        sample_mosaic(g, sample_pairs)?
            .save_png(samples_dir.join(format!("iter_{:06}.png", iter + 1)))?;
        Ok(())
    })?;
    outcome.log.save(opts.out.join(LOG_FILE))?;
    Checkpoint::from_models(&outcome.generator, &outcome.discriminator)
        .save(opts.out.join(CHECKPOINT_FILE))?;
    Ok(outcome)
}
