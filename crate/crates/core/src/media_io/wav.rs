use std::path::Path;

use super::MediaError;
use crate::melspec::AudioSignal;

/// Reads a 16-bit PCM mono WAV file, scaling samples by 1/32768.
///
/// No resampling is done: a file whose rate differs from
/// `expected_rate` is an error.
pub fn load_wav(path: impl AsRef<Path>, expected_rate: u32) -> Result<AudioSignal, MediaError> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| MediaError::Unreadable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(MediaError::UnsupportedFormat {
            path: path.to_path_buf(),
            format: format!("{:?} {}-bit", spec.sample_format, spec.bits_per_sample),
        });
    }
    if spec.channels != 1 {
        return Err(MediaError::UnsupportedFormat {
            path: path.to_path_buf(),
            format: format!("{} channels", spec.channels),
        });
    }
    if spec.sample_rate != expected_rate {
        return Err(MediaError::SampleRateMismatch {
            path: path.to_path_buf(),
            found: spec.sample_rate,
            expected: expected_rate,
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| MediaError::Unreadable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    Ok(AudioSignal::new(samples, spec.sample_rate)?)
}

/// Writes samples in `[-1, 1]` as 16-bit PCM mono.
pub fn write_wav(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<(), MediaError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    for &s in signal.samples() {
        w.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?;
    }
    w.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw(path: &Path, channels: u16, rate: u32, samples: &[i16]) {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for &s in samples {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn silent_one_second() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.wav");
        write_raw(&p, 1, 16000, &vec![0; 16000]);
        let sig = load_wav(&p, 16000).unwrap();
        assert_eq!(sig.samples().len(), 16000);
        assert!(sig.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn range_endpoint() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.wav");
        write_raw(&p, 1, 16000, &[-32768, 16384, 32767]);
        let sig = load_wav(&p, 16000).unwrap();
        assert_eq!(sig.samples(), &[-1.0, 0.5, 32767.0 / 32768.0]);
    }

    #[test]
    fn wrong_rate_and_stereo_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.wav");
        write_raw(&p, 1, 22050, &[0; 10]);
        assert!(matches!(
            load_wav(&p, 16000),
            Err(MediaError::SampleRateMismatch { found: 22050, .. })
        ));
        write_raw(&p, 2, 16000, &[0; 10]);
        assert!(matches!(
            load_wav(&p, 16000),
            Err(MediaError::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn float_wav_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            load_wav(&p, 16000),
            Err(MediaError::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn write_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.wav");
        let sig = AudioSignal::new(vec![0.0, 0.5, -0.25, -1.0], 16000).unwrap();
        write_wav(&p, &sig).unwrap();
        assert_eq!(load_wav(&p, 16000).unwrap(), sig);
    }
}
