use std::path::PathBuf;

use ganlip_core::gan::SeedStream;
use ganlip_core::media_io::{
    crop_and_resize, load_bboxes, load_frame, load_wav, plan_frame_shifts, BoundingBox,
    CorpusManifest, MAX_FRAME_SHIFT,
};
use ganlip_core::melspec::{log_mel_spectrogram, windows_for_frames, MelConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::store::write_video;
use crate::CliError;

/// Optional per-video face boxes, next to the frames.
pub const BBOX_FILE: &str = "bboxes.csv";

#[derive(Clone, Debug)]
pub struct PreprocessOptions {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub image_size: usize,
    pub mel: MelConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PreprocessSummary {
    pub videos: usize,
    /// Raw frames read from the manifest.
    pub frames: usize,
    /// Frame pairs emitted into the store.
    pub pairs: usize,
    pub mel_shape: [usize; 2],
}

/// Crops and resizes every frame, cuts one mel window per frame and draws the
/// reference-frame shifts. Videos are processed in manifest order with one
/// seeded generator, so reruns are byte-identical.
pub fn cmd_preprocess(opts: &PreprocessOptions) -> Result<PreprocessSummary, CliError> {
    opts.mel.validate()?;
    if opts.image_size < 2 {
        return Err(CliError::usage("image size must be at least 2"));
    }
    let manifest =
        CorpusManifest::load(&opts.manifest).map_err(|e| CliError::from(e).context("manifest"))?;
    if manifest.entries.is_empty() {
        return Err(CliError::usage(format!(
            "{}: manifest has no videos",
            opts.manifest.display()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(SeedStream::Pairs as u64));
    let mut summary = PreprocessSummary {
        videos: 0,
        frames: 0,
        pairs: 0,
        mel_shape: [opts.mel.n_mels, opts.mel.window_cols],
    };
    for e in &manifest.entries {
        let bbox_path = e.frame_dir.join(BBOX_FILE);
        let boxes = if bbox_path.is_file() {
            Some(load_bboxes(&bbox_path)?)
        } else {
            None
        };
        let mut frames = Vec::with_capacity(e.n_frames);
        for i in 0..e.n_frames {
            let img = load_frame(e.frame_path(i))?;
            let bbox = boxes
                .as_ref()
                .and_then(|b| b.get(&i).copied())
                .unwrap_or_else(|| BoundingBox::full(&img));
            frames.push(crop_and_resize(&img, bbox, opts.image_size)?);
        }
        let audio = load_wav(&e.wav, opts.mel.sample_rate)?;
        let spec = log_mel_spectrogram(&audio, &opts.mel)?;
        let idx: Vec<usize> = (0..e.n_frames).collect();
        let mels = windows_for_frames(&spec, &idx, e.fps, &opts.mel)
            .map_err(|err| CliError::from(err).context(&e.video_id))?;
        let pairs = plan_frame_shifts(e.n_frames, MAX_FRAME_SHIFT, &mut rng)?;
        write_video(&opts.out, &e.video_id, &frames, &mels, &pairs)?;
        summary.videos += 1;
        summary.frames += e.n_frames;
        summary.pairs += pairs.len();
    }
    std::fs::write(
        opts.out.join("preprocess.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(summary)
}
