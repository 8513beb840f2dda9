use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ganlip_core::gan::{Checkpoint, SeedStream, ToyGenerator};
use ganlip_core::media_io::{FramePair, ImageTensor};
use ganlip_core::melspec::LOG_EPS;
use ganlip_core::metrics::{
    frechet_distance, gaussian_stats, partition_finite, psnr, ssim, summarize, EmbeddingSet,
    MetricsSummary, SsimParams, ToyEmbedder,
};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::Serialize;

use crate::report::RunReport;
use crate::train::{load_pairs, DataSource, RunConfig};
use crate::CliError;

/// Caps the evaluation worker count.
pub const THREADS_ENV: &str = "GANLIP_THREADS";

pub const FRAMES_FILE: &str = "frames.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorSource {
    Checkpoint(PathBuf),
    /// Freshly initialized with the training seed: the untrained baseline.
    Untrained,
    /// Returns the ground truth itself.
    Identity,
}

#[derive(Clone, Debug)]
pub struct EvaluateOptions {
    pub generator: GeneratorSource,
    pub config: RunConfig,
    pub data: DataSource,
    pub out: PathBuf,
    /// Precomputed EMB1 embeddings `(real, generated)` used for FID instead
    /// of the built-in projection.
    pub embeddings: Option<(PathBuf, PathBuf)>,
    /// Name written into the report; defaults to the generator source.
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameScore {
    pub video_id: String,
    pub frame_index: usize,
    pub ssim: f64,
    pub psnr_db: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub metric: String,
    pub model: String,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub max: Option<f64>,
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub n: usize,
    pub n_outliers: usize,
    pub n_infinite: usize,
}

impl SummaryEntry {
    fn new(metric: &str, model: &str, s: Option<&MetricsSummary>, n_infinite: usize) -> Self {
        Self {
            metric: metric.into(),
            model: model.into(),
            mean: s.map(|s| s.mean),
            median: s.map(|s| s.median),
            max: s.map(|s| s.max),
            min: s.map(|s| s.min),
            q1: s.map(|s| s.q1),
            q3: s.map(|s| s.q3),
            n: s.map_or(0, |s| s.n),
            n_outliers: s.map_or(0, |s| s.n_outliers),
            n_infinite,
        }
    }
}

pub struct EvaluateOutput {
    pub report: RunReport,
    pub frames: Vec<FrameScore>,
}

fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::usage(format!("{THREADS_ENV}={v} is not a thread count")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(CliError::internal)
}

fn generate_all(
    source: &GeneratorSource,
    cfg: &RunConfig,
    pairs: &[FramePair],
) -> Result<Vec<ImageTensor>, CliError> {
    let first = &pairs[0];
    let image_dims = first.target.dims();
    let audio_dims = (first.audio.n_mels(), first.audio.n_frames());
    let g = match source {
        GeneratorSource::Identity => return Ok(pairs.iter().map(|p| p.target.clone()).collect()),
        GeneratorSource::Checkpoint(path) => Checkpoint::load(path)
            .and_then(|c| c.generator())
            .map_err(|e| CliError::from(e).context(path.display()))?,
        GeneratorSource::Untrained => ToyGenerator::new(
            image_dims,
            audio_dims,
            0,
            cfg.train.hidden,
            LOG_EPS.ln(),
            &mut rand_chacha::ChaCha8Rng::seed_from_u64(
                cfg.train.stream_seed(SeedStream::GeneratorInit),
            ),
        ),
    };
    if g.image_dims != image_dims || g.audio_dims != audio_dims {
        return Err(CliError::usage(format!(
            "checkpoint expects images {:?} and audio {:?}, data has {:?} and {:?}",
            g.image_dims, g.audio_dims, image_dims, audio_dims
        )));
    }
    let inputs: Vec<_> = pairs.iter().map(|p| (&p.reference, &p.audio)).collect();
    Ok(g.generate_batch(&inputs)?)
}

fn fid(
    embeddings: &Option<(PathBuf, PathBuf)>,
    real: &[ImageTensor],
    generated: &[ImageTensor],
) -> Result<(Option<f64>, String), CliError> {
    let (r, g, label) = match embeddings {
        Some((rp, gp)) => (
            EmbeddingSet::load(rp)?,
            EmbeddingSet::load(gp)?,
            "precomputed".to_string(),
        ),
        None => {
            if real.len() < 2 {
                return Ok((None, ToyEmbedder::LABEL.into()));
            }
            let e = ToyEmbedder::new(real[0].data().len());
            (
                e.embed_all(real)?,
                e.embed_all(generated)?,
                ToyEmbedder::LABEL.into(),
            )
        }
    };
    let d = frechet_distance(&gaussian_stats(&r)?, &gaussian_stats(&g)?)?;
    Ok((Some(d), label))
}

fn write_frames(path: &Path, frames: &[FrameScore]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["video_id", "frame_index", "ssim", "psnr_db"])?;
    for f in frames {
        let psnr = if f.psnr_db.is_infinite() {
            "inf".to_string()
        } else {
            f.psnr_db.to_string()
        };
        w.write_record([
            f.video_id.clone(),
            f.frame_index.to_string(),
            f.ssim.to_string(),
            psnr,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Generates `Ŝ` for every evaluation pair and scores it against `S`.
/// Writes `frames.csv`, `summary.json` and `report.json` to `out`.
pub fn cmd_evaluate(opts: &EvaluateOptions) -> Result<EvaluateOutput, CliError> {
    let start = Instant::now();
    let tagged = load_pairs(&opts.data, &opts.config, true)?;
    if tagged.is_empty() {
        return Err(CliError::usage("no evaluation pairs"));
    }
    let pairs: Vec<FramePair> = tagged.iter().map(|(_, p)| p.clone()).collect();
    let generated = generate_all(&opts.generator, &opts.config, &pairs)?;
    let params = SsimParams::default();

    let scores: Vec<(f64, f64)> = worker_pool()?.install(|| {
        generated
            .par_iter()
            .zip(pairs.par_iter())
            .map(|(g, p)| {
                Ok((
                    ssim(g, &p.target, &params)?,
                    psnr(g, &p.target, params.dynamic_range)?,
                ))
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    let frames: Vec<FrameScore> = tagged
        .iter()
        .zip(&scores)
        .map(|((id, p), &(s, q))| FrameScore {
            video_id: id.clone(),
            frame_index: p.frame_index,
            ssim: s,
            psnr_db: q,
        })
        .collect();

    let model = opts.label.clone().unwrap_or_else(|| match &opts.generator {
        GeneratorSource::Checkpoint(p) => p.display().to_string(),
        GeneratorSource::Untrained => "untrained".into(),
        GeneratorSource::Identity => "identity".into(),
    });
    let mut metrics = BTreeMap::new();
    let mut n_infinite = BTreeMap::new();
    let mut entries = Vec::new();
    for (name, values) in [
        ("ssim", scores.iter().map(|s| s.0).collect::<Vec<_>>()),
        ("psnr", scores.iter().map(|s| s.1).collect::<Vec<_>>()),
    ] {
        let (finite, n_inf) = partition_finite(&values);
        let summary = if finite.is_empty() {
            None
        } else {
            Some(summarize(&finite)?)
        };
        entries.push(SummaryEntry::new(name, &model, summary.as_ref(), n_inf));
        if let Some(s) = summary {
            metrics.insert(name.to_string(), s);
        }
        n_infinite.insert(name.to_string(), n_inf);
    }

    let targets: Vec<ImageTensor> = pairs.iter().map(|p| p.target.clone()).collect();
    let (fid, embedder) = fid(&opts.embeddings, &targets, &generated)?;

    std::fs::create_dir_all(&opts.out)?;
    write_frames(&opts.out.join(FRAMES_FILE), &frames)?;
    std::fs::write(
        opts.out.join(SUMMARY_FILE),
        serde_json::to_string_pretty(&entries)? + "\n",
    )?;
    let report = RunReport {
        model,
        split: match opts.data {
            DataSource::Toy => "toy-held-out".into(),
            DataSource::Store(ref p) => p.display().to_string(),
        },
        metrics,
        n_infinite,
        fid,
        embedder,
        config: serde_json::json!({
            "generator": opts.generator,
            "data": opts.data,
            "embeddings": opts.embeddings,
            "config": RunConfig { train: opts.config.train.clone(), toy: opts.config.toy_config() },
        }),
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    std::fs::write(
        opts.out.join(REPORT_FILE),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    Ok(EvaluateOutput { report, frames })
}
