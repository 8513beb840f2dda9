use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad, AutodiffError, Tape, Tensor, Value};
use crate::media_io::{FramePair, ImageTensor};
use crate::melspec::LOG_EPS;
use crate::metrics::{psnr, ssim, SsimParams};

use super::adam::{Adam, AdamState};
use super::config::{SeedStream, TrainConfig};
use super::losses::{
    bce, l1_reconstruction_loss, lipgan_generator_loss, lipgan_losses, wgan_generator_loss,
    wgan_gp_loss,
};
use super::model::{audio_row, face_row, Critic, ToyDiscriminator, ToyGenerator};
use super::penalty::gradient_penalty;
use super::GanError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    LipGan,
    L1WganGp,
}

impl std::str::FromStr for ModelKind {
    type Err = GanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lipgan" => Ok(Self::LipGan),
            "l1wgan-gp" => Ok(Self::L1WganGp),
            other => Err(GanError::InvalidConfig(format!(
                "unknown model {other:?}, expected lipgan or l1wgan-gp"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LipGan => "lipgan",
            Self::L1WganGp => "l1wgan-gp",
        })
    }
}

/// One logged iteration. Losses that were not computed on that iteration
/// are `None` and serialize as empty CSV fields.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub iter: usize,
    pub loss_g: Option<f64>,
    pub loss_d: f64,
    pub loss_face: Option<f64>,
    pub loss_audio: Option<f64>,
    pub gp: Option<f64>,
    /// Mean SSIM of the generator on the sample pairs.
    pub ssim: f64,
    /// Mean finite PSNR (dB) on the sample pairs.
    pub psnr: f64,
    /// L1 reconstruction loss on the sample pairs (training range).
    pub l1: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    records: Vec<LogRecord>,
}

pub const LOG_HEADER: [&str; 8] = [
    "iter",
    "loss_G",
    "loss_D",
    "loss_face",
    "loss_audio",
    "gp",
    "ssim",
    "psnr",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainLog {
    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn push(&mut self, r: LogRecord) -> Result<(), GanError> {
        if let Some(last) = self.records.last() {
            if r.iter <= last.iter {
                return Err(GanError::InvalidConfig(format!(
                    "log iterations must increase: {} after {}",
                    r.iter, last.iter
                )));
            }
        }
        self.records.push(r);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), GanError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(LOG_HEADER)?;
        for r in &self.records {
            out.write_record([
                r.iter.to_string(),
                opt(r.loss_g),
                r.loss_d.to_string(),
                opt(r.loss_face),
                opt(r.loss_audio),
                opt(r.gp),
                r.ssim.to_string(),
                r.psnr.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is UTF-8")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GanError> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Per-iteration traces kept alongside the log.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub generator_updates: usize,
    pub discriminator_updates: usize,
    /// Mean input-gradient norm of the critic at the penalty points, one
    /// entry per iteration (Wasserstein runs only).
    pub gp_norms: Vec<f64>,
    /// Batch L1 reconstruction loss at every generator update.
    pub batch_l1: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: TrainLog,
    pub generator: ToyGenerator,
    pub discriminator: ToyDiscriminator,
    pub diagnostics: Diagnostics,
}

/// Training data as matrices in the networks' input ranges.
struct Rows {
    n: usize,
    face_dim: usize,
    audio_dim: usize,
    target: Vec<f64>,
    reference: Vec<f64>,
    audio: Vec<f64>,
    image_dims: (usize, usize, usize),
    audio_dims: (usize, usize),
}

impl Rows {
    fn new(pairs: &[FramePair], log_floor: f64) -> Result<Self, GanError> {
        let first = pairs.first().ok_or(GanError::EmptyData)?;
        let image_dims = first.target.dims();
        let audio_dims = (first.audio.n_mels(), first.audio.n_frames());
        let mut rows = Rows {
            n: pairs.len(),
            face_dim: image_dims.0 * image_dims.1 * image_dims.2,
            audio_dim: audio_dims.0 * audio_dims.1,
            target: Vec::new(),
            reference: Vec::new(),
            audio: Vec::new(),
            image_dims,
            audio_dims,
        };
        for (i, p) in pairs.iter().enumerate() {
            if p.target.dims() != image_dims
                || p.reference.dims() != image_dims
                || (p.audio.n_mels(), p.audio.n_frames()) != audio_dims
            {
                return Err(GanError::Shape(format!(
                    "pair {i} differs in shape from pair 0"
                )));
            }
            rows.target.extend(face_row(&p.target));
            rows.reference.extend(face_row(&p.reference));
            rows.audio.extend(audio_row(&p.audio, log_floor));
        }
        Ok(rows)
    }

    fn gather(src: &[f64], dim: usize, idx: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(idx.len() * dim);
        for &i in idx {
            data.extend_from_slice(&src[i * dim..(i + 1) * dim]);
        }
        Tensor::matrix(idx.len(), dim, data).expect("sized")
    }

    fn batch(&self, idx: &[usize]) -> Batch {
        Batch {
            target: Self::gather(&self.target, self.face_dim, idx),
            reference: Self::gather(&self.reference, self.face_dim, idx),
            audio: Self::gather(&self.audio, self.audio_dim, idx),
        }
    }
}

struct Batch {
    target: Tensor,
    reference: Tensor,
    audio: Tensor,
}

/// Epoch-wise shuffled mini-batches; the last batch of an epoch may be short.
struct Batches {
    n: usize,
    bs: usize,
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl Batches {
    fn new(n: usize, bs: usize, seed: u64) -> Self {
        Self {
            n,
            bs,
            order: Vec::new(),
            pos: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn next_batch(&mut self) -> Vec<usize> {
        if self.pos >= self.order.len() {
            self.order = (0..self.n).collect();
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.bs).min(self.n);
        let b = self.order[self.pos..end].to_vec();
        self.pos = end;
        b
    }
}

/// Total iterations of a run over `n` pairs.
pub fn total_iterations(cfg: &TrainConfig, n: usize) -> usize {
    cfg.max_iters
        .unwrap_or(cfg.epochs * n.div_ceil(cfg.batch_size))
}

fn tag(iter: usize) -> impl Fn(GanError) -> GanError {
    move |e| match e {
        GanError::Autodiff(AutodiffError::NonFinite { op }) => GanError::NonFiniteLoss {
            iter,
            detail: format!("non-finite value in {op}"),
        },
        GanError::NonFiniteGradient => GanError::NonFiniteLoss {
            iter,
            detail: "non-finite gradient".into(),
        },
        other => other,
    }
}

fn finite(v: &Value, iter: usize, what: &str) -> Result<f64, GanError> {
    let x = v.item()?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(GanError::NonFiniteLoss {
            iter,
            detail: what.to_string(),
        })
    }
}

fn param_grads(loss: &Value, params: &[Value]) -> Result<Vec<Tensor>, GanError> {
    let refs: Vec<&Value> = params.iter().collect();
    Ok(grad(loss, &refs, false)?
        .values
        .into_iter()
        .map(|v| v.tensor().clone())
        .collect())
}

fn forward_only(g: &ToyGenerator, b: &Batch) -> Result<Tensor, GanError> {
    let tape = Tape::new();
    let params = g.net.bind(&tape);
    let r = tape.leaf(b.reference.clone());
    let a = tape.leaf(b.audio.clone());
    Ok(g.forward(&params, &r, &a, None)?.tensor().clone())
}

/// Generator quality on the fixed sample pairs: (ssim, psnr, l1).
fn sample_metrics(
    g: &ToyGenerator,
    rows: &Rows,
    sample: &Batch,
) -> Result<(f64, f64, f64), GanError> {
    let out = forward_only(g, sample)?;
    let n = out.shape()[0];
    let d = rows.face_dim;
    let (h, w, c) = rows.image_dims;
    let to_img = |row: &[f64]| {
        ImageTensor::new(
            h,
            w,
            c,
            row.iter()
                .map(|v| ((v + 1.0) / 2.0).clamp(0.0, 1.0))
                .collect(),
        )
    };
    let params = SsimParams::default();
    let (mut s_sum, mut p_sum, mut p_n, mut l1) = (0.0, 0.0, 0usize, 0.0);
    for i in 0..n {
        let gen = &out.data()[i * d..(i + 1) * d];
        let tgt = &sample.target.data()[i * d..(i + 1) * d];
        l1 += gen.iter().zip(tgt).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let (gi, ti) = (to_img(gen)?, to_img(tgt)?);
        if h.min(w) >= params.window {
            s_sum += ssim(&gi, &ti, &params)?;
        }
        let p = psnr(&gi, &ti, 1.0)?;
        if p.is_finite() {
            p_sum += p;
            p_n += 1;
        }
    }
    let psnr_mean = if p_n == 0 {
        f64::INFINITY
    } else {
        p_sum / p_n as f64
    };
    let ssim_mean = if h.min(w) >= params.window {
        s_sum / n as f64
    } else {
        f64::NAN
    };
    Ok((ssim_mean, psnr_mean, l1 / n as f64))
}

struct StepLosses {
    loss_d: f64,
    loss_g: Option<f64>,
    loss_face: Option<f64>,
    loss_audio: Option<f64>,
    gp: Option<f64>,
}

/// Runs either protocol. `on_sample` is called with the 0-based iteration
/// index every `cfg.sample_every` iterations (when non-zero).
pub fn train(
    kind: ModelKind,
    cfg: &TrainConfig,
    pairs: &[FramePair],
    on_sample: &mut dyn FnMut(usize, &ToyGenerator) -> Result<(), GanError>,
) -> Result<TrainOutcome, GanError> {
    cfg.validate()?;
    let log_floor = LOG_EPS.ln();
    let rows = Rows::new(pairs, log_floor)?;
    let mut g = ToyGenerator::new(
        rows.image_dims,
        rows.audio_dims,
        0,
        cfg.hidden,
        log_floor,
        &mut ChaCha8Rng::seed_from_u64(cfg.stream_seed(SeedStream::GeneratorInit)),
    );
    let mut d = ToyDiscriminator::new(
        rows.image_dims,
        rows.audio_dims,
        cfg.hidden,
        &mut ChaCha8Rng::seed_from_u64(cfg.stream_seed(SeedStream::DiscriminatorInit)),
    );
    let adam = Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2);
    let mut g_state = AdamState::new(&g.net.params);
    let mut d_state = AdamState::new(&d.net.params);
    let mut penalty_rng = ChaCha8Rng::seed_from_u64(cfg.stream_seed(SeedStream::Penalty));
    let mut batches = Batches::new(rows.n, cfg.batch_size, cfg.stream_seed(SeedStream::Shuffle));
    let sample_idx: Vec<usize> = (0..cfg.n_samples.clamp(1, rows.n)).collect();
    let sample = rows.batch(&sample_idx);

    let total = total_iterations(cfg, rows.n);
    let mut log = TrainLog::default();
    let mut diag = Diagnostics::default();

    for iter in 0..total {
        let idx = batches.next_batch();
        let b = rows.batch(&idx);
        let step = match kind {
            ModelKind::L1WganGp => wgan_step(
                cfg,
                iter,
                &b,
                &mut g,
                &mut d,
                &adam,
                &mut g_state,
                &mut d_state,
                &mut penalty_rng,
                &mut diag,
            ),
            ModelKind::LipGan => {
                // time-unsynced audio: the batch audio rolled by one, or the
                // next pair's audio for single-sample batches
                let unsynced = if idx.len() > 1 {
                    let rolled: Vec<usize> =
                        (0..idx.len()).map(|k| idx[(k + 1) % idx.len()]).collect();
                    Rows::gather(&rows.audio, rows.audio_dim, &rolled)
                } else {
                    Rows::gather(&rows.audio, rows.audio_dim, &[(idx[0] + 1) % rows.n])
                };
                lipgan_step(
                    cfg,
                    iter,
                    &b,
                    &unsynced,
                    &mut g,
                    &mut d,
                    &adam,
                    &mut g_state,
                    &mut d_state,
                    &mut diag,
                )
            }
        }
        .map_err(tag(iter))?;

        if iter % cfg.loss_log_every == 0 || iter + 1 == total {
            let (s, p, l1) = sample_metrics(&g, &rows, &sample).map_err(tag(iter))?;
            log.push(LogRecord {
                iter,
                loss_g: step.loss_g,
                loss_d: step.loss_d,
                loss_face: step.loss_face,
                loss_audio: step.loss_audio,
                gp: step.gp,
                ssim: s,
                psnr: p,
                l1,
            })?;
        }
        if cfg.sample_every > 0 && (iter + 1) % cfg.sample_every == 0 {
            on_sample(iter, &g)?;
        }
    }
    Ok(TrainOutcome {
        log,
        generator: g,
        discriminator: d,
        diagnostics: diag,
    })
}

#[allow(clippy::too_many_arguments)]
fn wgan_step(
    cfg: &TrainConfig,
    iter: usize,
    b: &Batch,
    g: &mut ToyGenerator,
    d: &mut ToyDiscriminator,
    adam: &Adam,
    g_state: &mut AdamState,
    d_state: &mut AdamState,
    rng: &mut ChaCha8Rng,
    diag: &mut Diagnostics,
) -> Result<StepLosses, GanError> {
    let fake = forward_only(g, b)?;

    let tape = Tape::new();
    let critic = d.bind(&tape);
    let real = tape.leaf(b.target.clone());
    let audio = tape.leaf(b.audio.clone());
    let d_fake = critic.score(&tape.leaf(fake.clone()), &audio)?;
    let d_real = critic.score(&real, &audio)?;
    let pen = gradient_penalty(
        &critic,
        &tape,
        &b.target,
        &fake,
        &audio,
        cfg.gp_input_mode,
        rng,
    )?;
    let loss_d = wgan_gp_loss(&d_fake, &d_real, &pen.value, cfg.lambda_gp)?;
    let loss_d_val = finite(&loss_d, iter, "critic loss")?;
    let grads = param_grads(&loss_d, &critic.params)?;
    adam.step(&mut d.net.params, &grads, d_state)?;
    diag.discriminator_updates += 1;
    diag.gp_norms.push(pen.mean_norm());
    let gp = pen.value.item()?;

    let loss_g = if iter.is_multiple_of(cfg.n_critic) {
        let tape = Tape::new();
        let gp_params = g.net.bind(&tape);
        let critic = d.bind(&tape);
        let r = tape.leaf(b.reference.clone());
        let a = tape.leaf(b.audio.clone());
        let s = tape.leaf(b.target.clone());
        let fake = g.forward(&gp_params, &r, &a, None)?;
        let l1 = l1_reconstruction_loss(&fake, &s)?;
        let loss = wgan_generator_loss(&critic.score(&fake, &a)?, &l1, cfg.l1_weight)?;
        let v = finite(&loss, iter, "generator loss")?;
        let grads = param_grads(&loss, &gp_params)?;
        adam.step(&mut g.net.params, &grads, g_state)?;
        diag.generator_updates += 1;
        diag.batch_l1.push(l1.item()?);
        Some(v)
    } else {
        None
    };
    Ok(StepLosses {
        loss_d: loss_d_val,
        loss_g,
        loss_face: None,
        loss_audio: None,
        gp: Some(gp),
    })
}

#[allow(clippy::too_many_arguments)]
fn lipgan_step(
    cfg: &TrainConfig,
    iter: usize,
    b: &Batch,
    unsynced: &Tensor,
    g: &mut ToyGenerator,
    d: &mut ToyDiscriminator,
    adam: &Adam,
    g_state: &mut AdamState,
    d_state: &mut AdamState,
    diag: &mut Diagnostics,
) -> Result<StepLosses, GanError> {
    let fake = forward_only(g, b)?;

    let tape = Tape::new();
    let critic = d.bind(&tape);
    let real = tape.leaf(b.target.clone());
    let audio = tape.leaf(b.audio.clone());
    let audio2 = tape.leaf(unsynced.clone());
    let l = lipgan_losses(&critic, &real, &tape.leaf(fake), &audio, &audio2)?;
    let loss_d = finite(&l.loss_d, iter, "discriminator loss")?;
    let grads = param_grads(&l.loss_d, &critic.params)?;
    adam.step(&mut d.net.params, &grads, d_state)?;
    diag.discriminator_updates += 1;

    let tape = Tape::new();
    let gp_params = g.net.bind(&tape);
    let critic = d.bind(&tape);
    let r = tape.leaf(b.reference.clone());
    let a = tape.leaf(b.audio.clone());
    let s = tape.leaf(b.target.clone());
    let fake = g.forward(&gp_params, &r, &a, None)?;
    let l1 = l1_reconstruction_loss(&fake, &s)?;
    let adv = bce(&critic.score(&fake, &a)?, true)?;
    let loss = lipgan_generator_loss(&l1, &adv, cfg.adv_weight)?;
    let loss_g = finite(&loss, iter, "generator loss")?;
    let grads = param_grads(&loss, &gp_params)?;
    adam.step(&mut g.net.params, &grads, g_state)?;
    diag.generator_updates += 1;
    diag.batch_l1.push(l1.item()?);

    Ok(StepLosses {
        loss_d,
        loss_g: Some(loss_g),
        loss_face: Some(l.loss_face.item()?),
        loss_audio: Some(l.loss_audio.item()?),
        gp: None,
    })
}

pub fn train_l1wgan_gp(cfg: &TrainConfig, pairs: &[FramePair]) -> Result<TrainOutcome, GanError> {
    train(ModelKind::L1WganGp, cfg, pairs, &mut |_, _| Ok(()))
}

pub fn train_lipgan(cfg: &TrainConfig, pairs: &[FramePair]) -> Result<TrainOutcome, GanError> {
    train(ModelKind::LipGan, cfg, pairs, &mut |_, _| Ok(()))
}
