//! Procedural stand-in for an audiovisual corpus: faces whose mouth opening
//! follows a scalar "phoneme signal", with a mel window synthesized from the
//! same signal.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::media_io::{
    frame_file_name, make_frame_pairs, write_wav, CorpusManifest, FramePair, ImageTensor,
    ManifestEntry, MAX_FRAME_SHIFT,
};
use crate::melspec::{AudioSignal, MelSpectrogram, LOG_EPS};

use super::GanError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub n_videos: usize,
    pub frames_per_video: usize,
    pub image_size: usize,
    pub seed: u64,
    pub n_speakers: usize,
    /// 1 (gray) or 3 (RGB).
    pub channels: usize,
    pub n_mels: usize,
    pub mel_cols: usize,
    pub fps: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n_videos: 20,
            frames_per_video: 20,
            image_size: 16,
            seed: 10,
            n_speakers: 4,
            channels: 3,
            n_mels: 16,
            mel_cols: 5,
            fps: 25.0,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<(), GanError> {
        let bad = |m: &str| Err(GanError::InvalidConfig(m.to_string()));
        if self.image_size < 8 {
            return bad("image_size must be at least 8");
        }
        if self.n_videos == 0 || self.n_speakers == 0 || self.n_mels < 2 || self.mel_cols == 0 {
            return bad("n_videos, n_speakers and mel_cols must be positive and n_mels >= 2");
        }
        if self.frames_per_video < 2 {
            return bad("frames_per_video must be at least 2 to draw a frame shift");
        }
        if !matches!(self.channels, 1 | 3) {
            return bad("channels must be 1 or 3");
        }
        if self.fps.is_nan() || self.fps <= 0.0 {
            return bad("fps must be positive");
        }
        Ok(())
    }

    /// Log value of silent mel bins.
    pub fn log_floor(&self) -> f64 {
        LOG_EPS.ln()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Speaker {
    background: [f64; 3],
    skin: [f64; 3],
    face_rx: f64,
    face_ry: f64,
    eye_dx: f64,
    mouth_w: f64,
}

impl Speaker {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let mut color = |lo: f64, hi: f64| {
            [
                rng.random_range(lo..hi),
                rng.random_range(lo..hi),
                rng.random_range(lo..hi),
            ]
        };
        let background = color(0.05, 0.35);
        let skin = color(0.6, 0.95);
        Self {
            background,
            skin,
            face_rx: rng.random_range(0.30..0.40),
            face_ry: rng.random_range(0.38..0.46),
            eye_dx: rng.random_range(0.12..0.17),
            mouth_w: rng.random_range(0.11..0.16),
        }
    }
}

fn soft(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mouth half-height for phoneme signal `s`.
fn mouth_height(s: f64) -> f64 {
    0.03 + 0.12 * s
}

fn render(sp: &Speaker, s: f64, size: usize, channels: usize) -> ImageTensor {
    let mut data = Vec::with_capacity(size * size * channels);
    for y in 0..size {
        let v = (y as f64 + 0.5) / size as f64;
        for x in 0..size {
            let u = (x as f64 + 0.5) / size as f64;
            let rf = (((u - 0.5) / sp.face_rx).powi(2) + ((v - 0.5) / sp.face_ry).powi(2)).sqrt();
            let face = soft((1.0 - rf) * 12.0);
            let mut shade = 1.0;
            for ex in [0.5 - sp.eye_dx, 0.5 + sp.eye_dx] {
                let re = ((u - ex).powi(2) + (v - 0.38).powi(2)).sqrt() / 0.06;
                shade *= 1.0 - 0.6 * face * soft((1.0 - re) * 6.0);
            }
            if v >= 0.5 {
                let rm = (((u - 0.5) / sp.mouth_w).powi(2)
                    + ((v - 0.72) / mouth_height(s)).powi(2))
                .sqrt();
                shade *= 1.0 - 0.7 * face * soft((1.0 - rm) * 8.0);
            }
            for c in 0..channels {
                let k = if channels == 1 { 0 } else { c };
                let base = face * sp.skin[k] + (1.0 - face) * sp.background[k];
                data.push((base * shade).clamp(0.0, 1.0));
            }
        }
    }
    ImageTensor::new(size, size, channels, data).expect("sized")
}

/// Phoneme signal of one video as a continuous function of frame time.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Signal {
    p1: f64,
    p2: f64,
    phi1: f64,
    phi2: f64,
}

impl Signal {
    fn at(&self, t: f64) -> f64 {
        (0.5 + 0.3 * (TAU * t / self.p1 + self.phi1).sin()
            + 0.2 * (TAU * t / self.p2 + self.phi2).sin())
        .clamp(0.0, 1.0)
    }
}

/// Log-mel window whose energy peaks at the bin proportional to the signal;
/// columns step half a video frame apart around frame time `t`.
fn synth_mel(sig: &Signal, t: f64, n_mels: usize, cols: usize) -> MelSpectrogram {
    let mut data = vec![0.0; n_mels * cols];
    let half = (cols / 2) as f64;
    for j in 0..cols {
        let s = sig.at(t + 0.5 * (j as f64 - half));
        let peak = s * (n_mels - 1) as f64;
        for m in 0..n_mels {
            let d = m as f64 - peak;
            data[m * cols + j] = (LOG_EPS + (-d * d / (2.0 * 1.5 * 1.5)).exp()).ln();
        }
    }
    MelSpectrogram::new(n_mels, cols, data).expect("sized")
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyVideo {
    pub video_id: String,
    pub speaker_id: String,
    pub frames: Vec<ImageTensor>,
    pub mels: Vec<MelSpectrogram>,
    /// Phoneme signal at each frame.
    pub signal: Vec<f64>,
    sig: Signal,
}

impl ToyVideo {
    /// Phoneme signal at fractional frame time `t`.
    pub fn signal_at(&self, t: f64) -> f64 {
        self.sig.at(t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyCorpus {
    pub config: ToyConfig,
    pub videos: Vec<ToyVideo>,
}

/// Video `v` belongs to speaker `v % n_speakers`; every draw flows from
/// `cfg.seed`.
pub fn make_toy_dataset(cfg: &ToyConfig) -> Result<ToyCorpus, GanError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let speakers: Vec<Speaker> = (0..cfg.n_speakers)
        .map(|_| Speaker::draw(&mut rng))
        .collect();
    let mut videos = Vec::with_capacity(cfg.n_videos);
    for v in 0..cfg.n_videos {
        let sig = Signal {
            p1: rng.random_range(6.0..10.0),
            p2: rng.random_range(3.0..5.0),
            phi1: rng.random_range(0.0..TAU),
            phi2: rng.random_range(0.0..TAU),
        };
        let spk = v % cfg.n_speakers;
        let signal: Vec<f64> = (0..cfg.frames_per_video)
            .map(|t| sig.at(t as f64))
            .collect();
        let frames = signal
            .iter()
            .map(|&s| render(&speakers[spk], s, cfg.image_size, cfg.channels))
            .collect();
        let mels = (0..cfg.frames_per_video)
            .map(|t| synth_mel(&sig, t as f64, cfg.n_mels, cfg.mel_cols))
            .collect();
        videos.push(ToyVideo {
            video_id: format!("toy{v:03}"),
            speaker_id: format!("s{spk}"),
            frames,
            mels,
            signal,
            sig,
        });
    }
    Ok(ToyCorpus {
        config: cfg.clone(),
        videos,
    })
}

impl ToyCorpus {
    pub fn image_dims(&self) -> (usize, usize, usize) {
        (
            self.config.image_size,
            self.config.image_size,
            self.config.channels,
        )
    }

    pub fn audio_dims(&self) -> (usize, usize) {
        (self.config.n_mels, self.config.mel_cols)
    }

    /// Frame pairs of the given videos, in video order.
    pub fn pairs<R: Rng + ?Sized>(
        &self,
        videos: std::ops::Range<usize>,
        rng: &mut R,
    ) -> Result<Vec<FramePair>, GanError> {
        let mut out = Vec::new();
        for v in &self.videos[videos] {
            out.extend(make_frame_pairs(&v.frames, &v.mels, MAX_FRAME_SHIFT, rng)?);
        }
        Ok(out)
    }

    /// Pairs of the first `n_videos − held_out` videos and of the rest.
    pub fn train_test_pairs(
        &self,
        held_out: usize,
        seed: u64,
    ) -> Result<(Vec<FramePair>, Vec<FramePair>), GanError> {
        let n = self.videos.len();
        if held_out >= n {
            return Err(GanError::InvalidConfig(format!(
                "cannot hold out {held_out} of {n} videos"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let train = self.pairs(0..n - held_out, &mut rng)?;
        let test = self.pairs(n - held_out..n, &mut rng)?;
        Ok((train, test))
    }
}

const TOY_SAMPLE_RATE: u32 = 16_000;

/// Writes PNG frames, a tone whose pitch follows the phoneme signal, and a
/// `manifest.jsonl` with relative paths. Returns the manifest path.
pub fn write_toy_corpus(corpus: &ToyCorpus, dir: impl AsRef<Path>) -> Result<PathBuf, GanError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let fps = corpus.config.fps;
    let mut entries = Vec::new();
    for v in &corpus.videos {
        let frame_dir = PathBuf::from(&v.video_id).join("frames");
        std::fs::create_dir_all(dir.join(&frame_dir))?;
        for (i, f) in v.frames.iter().enumerate() {
            f.save_png(dir.join(&frame_dir).join(frame_file_name(i)))?;
        }
        let n = (v.frames.len() as f64 / fps * TOY_SAMPLE_RATE as f64).round() as usize;
        let mut phase = 0.0;
        let samples = (0..n)
            .map(|k| {
                let s = v.signal_at(k as f64 / TOY_SAMPLE_RATE as f64 * fps);
                phase += TAU * (300.0 + 2000.0 * s) / TOY_SAMPLE_RATE as f64;
                0.5 * phase.sin()
            })
            .collect();
        let wav = PathBuf::from(&v.video_id).join("audio.wav");
        write_wav(dir.join(&wav), &AudioSignal::new(samples, TOY_SAMPLE_RATE)?)?;
        entries.push(ManifestEntry {
            video_id: v.video_id.clone(),
            speaker_id: v.speaker_id.clone(),
            frame_dir,
            wav,
            n_frames: v.frames.len(),
            fps,
        });
    }
    let path = dir.join("manifest.jsonl");
    let f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    CorpusManifest::new(entries)?.write_jsonl(f)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ToyConfig {
        ToyConfig {
            n_videos: 4,
            frames_per_video: 12,
            ..ToyConfig::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(
            make_toy_dataset(&small()).unwrap(),
            make_toy_dataset(&small()).unwrap()
        );
        let other = ToyConfig {
            seed: 11,
            ..small()
        };
        assert_ne!(
            make_toy_dataset(&small()).unwrap(),
            make_toy_dataset(&other).unwrap()
        );
    }

    #[test]
    fn equal_signal_gives_equal_lower_half() {
        let cfg = small();
        let c = make_toy_dataset(&cfg).unwrap();
        // videos 0 and 4k share a speaker; compare renders at one signal value
        let sp = {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            Speaker::draw(&mut rng)
        };
        let a = render(&sp, 0.37, 16, 3);
        let b = render(&sp, 0.37, 16, 3);
        assert_eq!(a, b);
        let frame0 = &c.videos[0].frames[0];
        assert_eq!(&render(&sp, c.videos[0].signal[0], 16, 3), frame0);
    }

    #[test]
    fn upper_half_ignores_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sp = Speaker::draw(&mut rng);
        let (a, b) = (render(&sp, 0.0, 16, 1), render(&sp, 1.0, 16, 1));
        assert_eq!(&a.data()[..128], &b.data()[..128]);
        assert_ne!(&a.data()[128..], &b.data()[128..]);
    }

    #[test]
    fn lower_half_intensity_tracks_signal() {
        let c = make_toy_dataset(&ToyConfig {
            n_videos: 4,
            frames_per_video: 40,
            ..ToyConfig::default()
        })
        .unwrap();
        for v in &c.videos {
            let half = 8 * 16 * 3;
            let means: Vec<f64> = v
                .frames
                .iter()
                .map(|f| f.data()[half..].iter().sum::<f64>() / half as f64)
                .collect();
            let r = pearson(&means, &v.signal);
            assert!(r.abs() > 0.99, "{r}");
        }
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn mel_peak_follows_signal() {
        let c = make_toy_dataset(&small()).unwrap();
        let v = &c.videos[1];
        for (mel, &s) in v.mels.iter().zip(&v.signal) {
            let centre = (0..16)
                .max_by(|&a, &b| mel.get(a, 2).total_cmp(&mel.get(b, 2)))
                .unwrap();
            assert!((centre as f64 - s * 15.0).abs() <= 0.5 + 1e-9);
        }
    }

    #[test]
    fn pairs_and_corpus_on_disk() {
        let c = make_toy_dataset(&small()).unwrap();
        let (train, test) = c.train_test_pairs(1, 5).unwrap();
        assert_eq!(train.len(), 36);
        assert_eq!(test.len(), 12);
        assert!(train
            .iter()
            .chain(&test)
            .all(|p| (1..=6).contains(&p.alpha.unsigned_abs())));
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_toy_corpus(&c, dir.path()).unwrap();
        let m = CorpusManifest::load(&manifest).unwrap();
        assert_eq!(m.entries.len(), 4);
        assert!(m.entries[0].frame_path(11).exists());
        let audio = crate::media_io::load_wav(&m.entries[0].wav, 16_000).unwrap();
        assert_eq!(audio.samples().len(), 12 * 640);
    }

    #[test]
    fn tiny_images_rejected() {
        assert!(make_toy_dataset(&ToyConfig {
            image_size: 7,
            ..small()
        })
        .is_err());
    }
}
