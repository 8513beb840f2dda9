use crate::autodiff::Value;

use super::model::Critic;
use super::GanError;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-7;

fn check_same(a: &Value, b: &Value, what: &str) -> Result<(), GanError> {
    if a.shape() != b.shape() {
        return Err(GanError::Shape(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn batch_rows(v: &Value) -> Result<usize, GanError> {
    match v.shape() {
        [n, _] if *n > 0 => Ok(*n),
        s => Err(GanError::Shape(format!(
            "expected a non-empty [batch, features] matrix, got {s:?}"
        ))),
    }
}

/// Mean over the batch of the summed absolute pixel error of each sample.
pub fn l1_reconstruction_loss(generated: &Value, targets: &Value) -> Result<Value, GanError> {
    check_same(generated, targets, "l1 reconstruction")?;
    let n = batch_rows(targets)?;
    Ok(targets
        .sub(generated)?
        .abs()?
        .sum()?
        .scale(1.0 / n as f64)?)
}

/// Critic loss `mean(fake) - mean(real) + lambda * gp`.
pub fn wgan_gp_loss(
    d_fake: &Value,
    d_real: &Value,
    gp: &Value,
    lambda_gp: f64,
) -> Result<Value, GanError> {
    if d_fake.numel() == 0 || d_real.numel() == 0 {
        return Err(GanError::EmptyData);
    }
    let w = d_fake.mean()?.sub(&d_real.mean()?)?;
    Ok(w.add(&gp.scale(lambda_gp)?)?)
}

/// Generator loss `-mean(fake) + l1_weight * l1`.
pub fn wgan_generator_loss(d_fake: &Value, l1: &Value, l1_weight: f64) -> Result<Value, GanError> {
    if d_fake.numel() == 0 {
        return Err(GanError::EmptyData);
    }
    Ok(d_fake.mean()?.neg()?.add(&l1.scale(l1_weight)?)?)
}

/// Binary cross-entropy of `sigmoid(logits)` against a constant label.
pub fn bce(logits: &Value, label: bool) -> Result<Value, GanError> {
    let p = logits.sigmoid()?.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)?;
    let q = if label { p } else { p.neg()?.add_scalar(1.0)? };
    Ok(q.ln()?.mean()?.neg()?)
}

/// Discriminator-side LipGAN losses.
#[derive(Clone, Debug)]
pub struct LipGanLosses {
    pub loss_d: Value,
    /// Fake face with its real audio, labelled 0.
    pub loss_face: Value,
    /// Real face with time-unsynced audio, labelled 0.
    pub loss_audio: Value,
    /// Real face with synced audio, labelled 1.
    pub loss_real: Value,
}

pub fn lipgan_losses<C: Critic + ?Sized>(
    d: &C,
    real: &Value,
    fake: &Value,
    audio: &Value,
    audio_unsynced: &Value,
) -> Result<LipGanLosses, GanError> {
    check_same(real, fake, "faces")?;
    check_same(audio, audio_unsynced, "audio")?;
    if batch_rows(real)? != batch_rows(audio)? {
        return Err(GanError::Shape(format!(
            "{} faces but {} audio windows",
            real.shape()[0],
            audio.shape()[0]
        )));
    }
    let loss_real = bce(&d.score(real, audio)?, true)?;
    let loss_face = bce(&d.score(fake, audio)?, false)?;
    let loss_audio = bce(&d.score(real, audio_unsynced)?, false)?;
    let loss_d = loss_real.add(&loss_face.add(&loss_audio)?.scale(0.5)?)?;
    Ok(LipGanLosses {
        loss_d,
        loss_face,
        loss_audio,
        loss_real,
    })
}

/// `l1 + adv_weight * loss_adv`, where `loss_adv` is the BCE of the fake
/// scores against label 1.
pub fn lipgan_generator_loss(
    l1: &Value,
    loss_adv: &Value,
    adv_weight: f64,
) -> Result<Value, GanError> {
    if adv_weight == 0.0 {
        return Ok(l1.clone());
    }
    Ok(l1.add(&loss_adv.scale(adv_weight)?)?)
}
