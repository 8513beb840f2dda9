//! On-disk layout of preprocessed videos:
//! `<root>/<video_id>/frames/frame_%05d.png`, `mel/mel_%05d.mel` and
//! `pairs.csv` with columns `frame_index,alpha`.

use std::path::{Path, PathBuf};

use ganlip_core::media_io::{frame_file_name, load_frame, FramePair, ImageTensor};
use ganlip_core::melspec::MelSpectrogram;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub fn mel_file_name(index: usize) -> String {
    format!("mel_{index:05}.mel")
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRow {
    frame_index: usize,
    alpha: i32,
}

/// Writes one video's frames, mel windows and pair index.
pub fn write_video(
    root: &Path,
    video_id: &str,
    frames: &[ImageTensor],
    mels: &[MelSpectrogram],
    pairs: &[(usize, i32)],
) -> Result<PathBuf, CliError> {
    let dir = root.join(video_id);
    std::fs::create_dir_all(dir.join("frames"))?;
    std::fs::create_dir_all(dir.join("mel"))?;
    for (i, f) in frames.iter().enumerate() {
        f.save_png(dir.join("frames").join(frame_file_name(i)))?;
    }
    for (i, m) in mels.iter().enumerate() {
        m.save(dir.join("mel").join(mel_file_name(i)))?;
    }
    let mut w = csv::Writer::from_path(dir.join("pairs.csv"))?;
    for &(frame_index, alpha) in pairs {
        w.serialize(PairRow { frame_index, alpha })?;
    }
    w.flush()?;
    Ok(dir)
}

/// Frame pairs of every video under `root`, ordered by video id.
pub fn read_pairs(root: &Path) -> Result<Vec<(String, FramePair)>, CliError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| CliError::usage(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("pairs.csv").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::usage(format!(
            "{}: no preprocessed videos",
            root.display()
        )));
    }
    let mut out = Vec::new();
    for dir in dirs {
        let id = dir
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let mut rdr = csv::Reader::from_path(dir.join("pairs.csv"))?;
        for row in rdr.deserialize() {
            let PairRow { frame_index, alpha } = row?;
            let reference_index = frame_index as i64 + alpha as i64;
            if reference_index < 0 {
                return Err(CliError::usage(format!(
                    "{id}: pair {frame_index} points before frame 0"
                )));
            }
            let frame = |i: usize| load_frame(dir.join("frames").join(frame_file_name(i)));
            out.push((
                id.clone(),
                FramePair {
                    target: frame(frame_index)?,
                    reference: frame(reference_index as usize)?,
                    alpha,
                    frame_index,
                    audio: MelSpectrogram::load(dir.join("mel").join(mel_file_name(frame_index)))?,
                },
            ));
        }
    }
    Ok(out)
}
