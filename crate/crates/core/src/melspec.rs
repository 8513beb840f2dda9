//! Log-mel spectrogram windows used as the audio condition of the generator.
//!
//! The pipeline is: reflect-padded, Hann-windowed STFT magnitude, power,
//! HTK-scale triangular filterbank, then `ln(power + 1e-5)`. A frame at
//! time `i / fps` gets a `n_mels × window_cols` slice of that spectrogram
//! centered on the nearest STFT column.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offset added to mel power before taking the log.
pub const LOG_EPS: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum MelError {
    #[error("invalid mel config: {0}")]
    InvalidConfig(String),
    #[error("signal of {len} samples is shorter than the {win_length}-sample window")]
    SignalTooShort { len: usize, win_length: usize },
    #[error("empty audio signal")]
    EmptySignal,
    #[error("{n_mels} mel bands do not fit in {fft_size}-point FFT: filters {band} and {next} share center bin {bin}")]
    TooManyMels {
        n_mels: usize,
        fft_size: usize,
        band: usize,
        next: usize,
        bin: usize,
    },
    #[error("frame {frame_index} at {fps} fps maps to column {column}, beyond the {n_columns} available")]
    FrameOutOfRange {
        frame_index: usize,
        fps: f64,
        column: usize,
        n_columns: usize,
    },
    #[error("invalid audio signal: {0}")]
    InvalidSignal(String),
    #[error("malformed MEL1 data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mono audio with samples in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, MelError> {
        if sample_rate == 0 {
            return Err(MelError::InvalidSignal(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(s) = samples.iter().find(|s| s.is_nan() || s.abs() > 1.0) {
            return Err(MelError::InvalidSignal(format!(
                "sample {s} outside [-1, 1]"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// STFT and filterbank parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop: usize,
    pub win_length: usize,
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
    /// Spectrogram columns per frame window (T).
    pub window_cols: usize,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16000,
            fft_size: 800,
            hop: 200,
            win_length: 800,
            n_mels: 80,
            fmin: 55.0,
            fmax: 7600.0,
            log_floor: LOG_EPS.ln(),
            window_cols: 27,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<(), MelError> {
        let bad = |m: &str| Err(MelError::InvalidConfig(m.to_string()));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive");
        }
        if self.hop == 0 || self.hop > self.win_length || self.win_length > self.fft_size {
            return bad("require 0 < hop <= win_length <= fft_size");
        }
        if !(self.fmin >= 0.0
            && self.fmin < self.fmax
            && self.fmax <= self.sample_rate as f64 / 2.0)
        {
            return bad("require 0 <= fmin < fmax <= sample_rate / 2");
        }
        if self.n_mels == 0 || self.window_cols == 0 {
            return bad("n_mels and window_cols must be positive");
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }
}

/// Row-major `n_mels × n_frames` matrix of log-mel energies.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    n_mels: usize,
    n_frames: usize,
    data: Vec<f64>,
}

impl MelSpectrogram {
    pub fn new(n_mels: usize, n_frames: usize, data: Vec<f64>) -> Result<Self, MelError> {
        if data.len() != n_mels * n_frames {
            return Err(MelError::Format(format!(
                "{} values for a {n_mels}x{n_frames} spectrogram",
                data.len()
            )));
        }
        Ok(Self {
            n_mels,
            n_frames,
            data,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, mel: usize, frame: usize) -> f64 {
        self.data[mel * self.n_frames + frame]
    }

    /// Serializes in the MEL1 layout: magic, u32 LE M, u32 LE T, f32 LE data.
    pub fn write_mel1<W: Write>(&self, mut w: W) -> Result<(), MelError> {
        let mut buf = Vec::with_capacity(12 + 4 * self.data.len());
        buf.extend_from_slice(b"MEL1");
        buf.extend_from_slice(&(self.n_mels as u32).to_le_bytes());
        buf.extend_from_slice(&(self.n_frames as u32).to_le_bytes());
        for &v in &self.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_mel1<R: Read>(mut r: R) -> Result<Self, MelError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 12 || &bytes[..4] != b"MEL1" {
            return Err(MelError::Format("missing MEL1 header".into()));
        }
        let m = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let t = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = &bytes[12..];
        if body.len() != 4 * m * t {
            return Err(MelError::Format(format!(
                "expected {} data bytes for {m}x{t}, found {}",
                4 * m * t,
                body.len()
            )));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Self::new(m, t, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MelError> {
        let f = std::fs::File::create(path)?;
        self.write_mel1(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MelError> {
        let f = std::fs::File::open(path)?;
        Self::read_mel1(std::io::BufReader::new(f))
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Periodic Hann window of `win_length`, zero-padded and centered in `fft_size`.
fn padded_hann(cfg: &MelConfig) -> Vec<f64> {
    let n = cfg.win_length;
    let mut w = vec![0.0; cfg.fft_size];
    let offset = (cfg.fft_size - n) / 2;
    for i in 0..n {
        let phase = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        w[offset + i] = 0.5 - 0.5 * phase.cos();
    }
    w
}

fn reflect_index(i: isize, len: usize) -> usize {
    let len = len as isize;
    if len == 1 {
        return 0;
    }
    let period = 2 * (len - 1);
    let mut j = i.rem_euclid(period);
    if j >= len {
        j = period - j;
    }
    j as usize
}

struct Stft {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Stft {
    fn new(cfg: &MelConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            window: padded_hann(cfg),
            fft: planner.plan_fft_forward(cfg.fft_size),
        }
    }

    /// Magnitudes, one `Vec` of `n_bins` per column.
    fn columns(&self, samples: &[f64], cfg: &MelConfig) -> Vec<Vec<f64>> {
        let n_fft = cfg.fft_size;
        let pad = (n_fft / 2) as isize;
        let n_cols = 1 + samples.len() / cfg.hop;
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        (0..n_cols)
            .map(|t| {
                let start = (t * cfg.hop) as isize - pad;
                for (k, b) in buf.iter_mut().enumerate() {
                    let x = samples[reflect_index(start + k as isize, samples.len())];
                    *b = Complex::new(x * self.window[k], 0.0);
                }
                self.fft.process_with_scratch(&mut buf, &mut scratch);
                buf[..cfg.n_bins()].iter().map(|c| c.norm()).collect()
            })
            .collect()
    }
}

/// Short-time magnitude spectra, `n_bins` rows by `n_windows` columns
/// (row-major). Column `t` is centered on sample `t * hop`.
pub fn stft_magnitude(signal: &AudioSignal, cfg: &MelConfig) -> Result<Vec<Vec<f64>>, MelError> {
    cfg.validate()?;
    let samples = signal.samples();
    if samples.len() < cfg.win_length {
        return Err(MelError::SignalTooShort {
            len: samples.len(),
            win_length: cfg.win_length,
        });
    }
    let cols = Stft::new(cfg).columns(samples, cfg);
    let n_bins = cfg.n_bins();
    Ok((0..n_bins)
        .map(|k| cols.iter().map(|c| c[k]).collect())
        .collect())
}

/// Center frequencies (Hz) of the `n_mels` filters, equally spaced in mel.
pub fn mel_center_frequencies(cfg: &MelConfig) -> Vec<f64> {
    mel_points(cfg)[1..=cfg.n_mels]
        .iter()
        .map(|&m| mel_to_hz(m))
        .collect()
}

fn mel_points(cfg: &MelConfig) -> Vec<f64> {
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
    let step = (hi - lo) / (cfg.n_mels + 1) as f64;
    (0..cfg.n_mels + 2).map(|i| lo + step * i as f64).collect()
}

/// Triangular filters over FFT bins, `n_mels` rows of `n_bins` weights.
///
/// Each filter rises linearly from the previous center bin to its own
/// center bin (weight 1) and falls to the next center bin.
pub fn mel_filterbank(cfg: &MelConfig) -> Result<Vec<Vec<f64>>, MelError> {
    cfg.validate()?;
    let n_bins = cfg.n_bins();
    let bins: Vec<usize> = mel_points(cfg)
        .iter()
        .map(|&m| {
            let b = (mel_to_hz(m) * cfg.fft_size as f64 / cfg.sample_rate as f64).round() as usize;
            b.min(n_bins - 1)
        })
        .collect();
    for (i, w) in bins.windows(2).enumerate() {
        if w[0] >= w[1] {
            return Err(MelError::TooManyMels {
                n_mels: cfg.n_mels,
                fft_size: cfg.fft_size,
                band: i.saturating_sub(1),
                next: i,
                bin: w[1],
            });
        }
    }
    Ok((0..cfg.n_mels)
        .map(|m| {
            let (left, center, right) = (bins[m], bins[m + 1], bins[m + 2]);
            let mut row = vec![0.0; n_bins];
            for (k, r) in row.iter_mut().enumerate().take(right).skip(left + 1) {
                *r = if k <= center {
                    (k - left) as f64 / (center - left) as f64
                } else {
                    (right - k) as f64 / (right - center) as f64
                };
            }
            row
        })
        .collect())
}

/// Full log-mel spectrogram of a signal (`n_mels × n_windows`).
pub fn log_mel_spectrogram(
    signal: &AudioSignal,
    cfg: &MelConfig,
) -> Result<MelSpectrogram, MelError> {
    cfg.validate()?;
    if signal.samples().is_empty() {
        return Err(MelError::EmptySignal);
    }
    if signal.samples().len() < cfg.win_length {
        return Err(MelError::SignalTooShort {
            len: signal.samples().len(),
            win_length: cfg.win_length,
        });
    }
    let fb = mel_filterbank(cfg)?;
    let cols = Stft::new(cfg).columns(signal.samples(), cfg);
    let n = cols.len();
    let mut data = vec![0.0; cfg.n_mels * n];
    for (t, col) in cols.iter().enumerate() {
        let power: Vec<f64> = col.iter().map(|m| m * m).collect();
        for (m, filt) in fb.iter().enumerate() {
            let e: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
            data[m * n + t] = (e + LOG_EPS).ln().max(cfg.log_floor);
        }
    }
    MelSpectrogram::new(cfg.n_mels, n, data)
}

/// STFT column nearest to the timestamp of `frame_index`.
pub fn center_column(frame_index: usize, fps: f64, cfg: &MelConfig) -> usize {
    let t = frame_index as f64 / fps;
    (t * cfg.sample_rate as f64 / cfg.hop as f64).round() as usize
}

/// Cuts the `window_cols`-wide window around `center` out of a full
/// spectrogram. Columns outside the spectrogram hold `log_floor`.
pub fn window_around(spec: &MelSpectrogram, center: usize, cfg: &MelConfig) -> MelSpectrogram {
    let t = cfg.window_cols;
    let before = (t / 2) as isize;
    let mut data = vec![cfg.log_floor; spec.n_mels() * t];
    for m in 0..spec.n_mels() {
        for j in 0..t {
            let col = center as isize - before + j as isize;
            if col >= 0 && (col as usize) < spec.n_frames() {
                data[m * t + j] = spec.get(m, col as usize);
            }
        }
    }
    MelSpectrogram {
        n_mels: spec.n_mels(),
        n_frames: t,
        data,
    }
}

/// The `n_mels × window_cols` log-mel window for one video frame.
pub fn mel_window_for_frame(
    signal: &AudioSignal,
    frame_index: usize,
    fps: f64,
    cfg: &MelConfig,
) -> Result<MelSpectrogram, MelError> {
    if signal.samples().is_empty() {
        return Err(MelError::EmptySignal);
    }
    let spec = log_mel_spectrogram(signal, cfg)?;
    windows_for_frames(&spec, &[frame_index], fps, cfg).map(|mut v| v.remove(0))
}

/// Windows for several frames sharing one precomputed spectrogram.
pub fn windows_for_frames(
    spec: &MelSpectrogram,
    frames: &[usize],
    fps: f64,
    cfg: &MelConfig,
) -> Result<Vec<MelSpectrogram>, MelError> {
    if fps.is_nan() || fps <= 0.0 {
        return Err(MelError::InvalidConfig(format!(
            "fps must be positive, got {fps}"
        )));
    }
    frames
        .iter()
        .map(|&i| {
            let c = center_column(i, fps, cfg);
            if c >= spec.n_frames() {
                return Err(MelError::FrameOutOfRange {
                    frame_index: i,
                    fps,
                    column: c,
                    n_columns: spec.n_frames(),
                });
            }
            Ok(window_around(spec, c, cfg))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, secs: f64, sr: u32) -> AudioSignal {
        let n = (secs * sr as f64) as usize;
        let s = (0..n)
            .map(|i| 0.5 * (2.0 * PI * freq * i as f64 / sr as f64).sin())
            .collect();
        AudioSignal::new(s, sr).unwrap()
    }

    /// O(N²) DFT magnitude of a real frame.
    fn dft_mag(frame: &[f64], n_bins: usize) -> Vec<f64> {
        let n = frame.len();
        (0..n_bins)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (j, &x) in frame.iter().enumerate() {
                    let a = -2.0 * PI * (k * j) as f64 / n as f64;
                    re += x * a.cos();
                    im += x * a.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn zero_signal_gives_zero_magnitudes() {
        let cfg = MelConfig::default();
        let sig = AudioSignal::new(vec![0.0; 4000], 16000).unwrap();
        let m = stft_magnitude(&sig, &cfg).unwrap();
        assert_eq!(m.len(), 401);
        assert!(m.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn impulse_column_matches_direct_dft() {
        let cfg = MelConfig::default();
        let mut s = vec![0.0; 4000];
        let t = 10;
        s[t * cfg.hop] = 1.0;
        let sig = AudioSignal::new(s, 16000).unwrap();
        let m = stft_magnitude(&sig, &cfg).unwrap();
        let mut frame = vec![0.0; cfg.fft_size];
        frame[cfg.fft_size / 2] = padded_hann(&cfg)[cfg.fft_size / 2];
        let oracle = dft_mag(&frame, cfg.n_bins());
        for k in 0..cfg.n_bins() {
            assert!((m[k][t] - oracle[k]).abs() < 1e-9, "bin {k}");
        }
    }

    #[test]
    fn arbitrary_column_matches_direct_dft() {
        let cfg = MelConfig {
            fft_size: 64,
            win_length: 48,
            hop: 16,
            ..MelConfig::default()
        };
        let s: Vec<f64> = (0..300)
            .map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.5)
            .collect();
        let sig = AudioSignal::new(s.clone(), 16000).unwrap();
        let m = stft_magnitude(&sig, &cfg).unwrap();
        let w = padded_hann(&cfg);
        for t in [0usize, 5, 18] {
            let frame: Vec<f64> = (0..64)
                .map(|k| s[reflect_index((t * 16) as isize - 32 + k as isize, s.len())] * w[k])
                .collect();
            let oracle = dft_mag(&frame, 33);
            for k in 0..33 {
                assert!((m[k][t] - oracle[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tone_peaks_at_expected_bin() {
        let cfg = MelConfig::default();
        let sig = tone(1000.0, 0.5, 16000);
        let m = stft_magnitude(&sig, &cfg).unwrap();
        let expected = (1000.0 * cfg.fft_size as f64 / 16000.0).round() as usize;
        let n_cols = m[0].len();
        for t in 2..n_cols - 2 {
            let argmax = (0..m.len())
                .max_by(|&a, &b| m[a][t].total_cmp(&m[b][t]))
                .unwrap();
            assert_eq!(argmax, expected, "column {t}");
        }
    }

    #[test]
    fn short_signal_rejected() {
        let cfg = MelConfig::default();
        let sig = AudioSignal::new(vec![0.0; 100], 16000).unwrap();
        assert!(matches!(
            stft_magnitude(&sig, &cfg),
            Err(MelError::SignalTooShort { .. })
        ));
    }

    #[test]
    fn filterbank_structure() {
        let cfg = MelConfig::default();
        let fb = mel_filterbank(&cfg).unwrap();
        assert_eq!(fb.len(), 80);
        for row in &fb {
            let max = row.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(row.iter().filter(|&&v| v == max).count(), 1);
            assert!(row.iter().all(|&v| v >= 0.0));
            let nz: Vec<usize> = (0..row.len()).filter(|&k| row[k] > 0.0).collect();
            // support is one contiguous run
            assert_eq!(nz.last().unwrap() - nz[0] + 1, nz.len());
        }
    }

    #[test]
    fn centers_evenly_spaced_in_mel() {
        let cfg = MelConfig::default();
        let c: Vec<f64> = mel_center_frequencies(&cfg)
            .iter()
            .map(|&f| hz_to_mel(f))
            .collect();
        let d0 = c[1] - c[0];
        for w in c.windows(2) {
            assert!((w[1] - w[0] - d0).abs() < 1e-9);
        }
    }

    #[test]
    fn first_center_matches_scalar_mel_oracle() {
        let cfg = MelConfig::default();
        // independent evaluation of the HTK formula
        let lo = 2595.0 * (1.0f64 + 55.0 / 700.0).log10();
        let hi = 2595.0 * (1.0f64 + 7600.0 / 700.0).log10();
        let first = lo + (hi - lo) / 81.0;
        let hz = 700.0 * (10f64.powf(first / 2595.0) - 1.0);
        let c0 = mel_center_frequencies(&cfg)[0];
        assert!((c0 - hz).abs() < 1e-9);
        // the peak bin of filter 0 is the nearest bin to that frequency
        let fb = mel_filterbank(&cfg).unwrap();
        let peak = (0..fb[0].len())
            .max_by(|&a, &b| fb[0][a].total_cmp(&fb[0][b]))
            .unwrap();
        assert_eq!(peak, (hz * 800.0 / 16000.0).round() as usize);
    }

    #[test]
    fn too_many_mels_rejected() {
        let cfg = MelConfig {
            fft_size: 64,
            win_length: 64,
            hop: 16,
            n_mels: 80,
            ..MelConfig::default()
        };
        assert!(matches!(
            mel_filterbank(&cfg),
            Err(MelError::TooManyMels { .. })
        ));
    }

    #[test]
    fn default_window_shape_and_silence() {
        let cfg = MelConfig::default();
        let sig = AudioSignal::new(vec![0.0; 48000], 16000).unwrap();
        let w = mel_window_for_frame(&sig, 25, 25.0, &cfg).unwrap();
        assert_eq!((w.n_mels(), w.n_frames()), (80, 27));
        assert!(w.data().iter().all(|&v| v == cfg.log_floor));
    }

    #[test]
    fn center_column_at_one_second() {
        assert_eq!(center_column(25, 25.0, &MelConfig::default()), 80);
    }

    #[test]
    fn edge_columns_filled_with_floor() {
        let cfg = MelConfig::default();
        let sig = tone(440.0, 1.0, 16000);
        let w = mel_window_for_frame(&sig, 0, 25.0, &cfg).unwrap();
        for m in 0..80 {
            for j in 0..13 {
                assert_eq!(w.get(m, j), cfg.log_floor);
            }
        }
        assert!(w.get(10, 13) > cfg.log_floor);
    }

    #[test]
    fn empty_signal_rejected() {
        let sig = AudioSignal::new(Vec::new(), 16000).unwrap();
        assert!(matches!(
            mel_window_for_frame(&sig, 0, 25.0, &MelConfig::default()),
            Err(MelError::EmptySignal)
        ));
    }

    #[test]
    fn window_duration_is_about_300ms() {
        let cfg = MelConfig::default();
        let secs = cfg.window_cols as f64 * cfg.hop as f64 / cfg.sample_rate as f64;
        assert!((secs - 0.3375).abs() < 1e-12);
    }

    #[test]
    fn mel1_layout() {
        let spec = MelSpectrogram::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, -6.5]).unwrap();
        let mut buf = Vec::new();
        spec.write_mel1(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"MEL1");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[8..12], &3u32.to_le_bytes());
        assert_eq!(&buf[buf.len() - 4..], &(-6.5f32).to_le_bytes());
        assert_eq!(MelSpectrogram::read_mel1(&buf[..]).unwrap(), spec);
        assert!(MelSpectrogram::read_mel1(&buf[..buf.len() - 1]).is_err());
    }
}
