use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::image::BoundingBox;
use super::MediaError;

/// One video of the corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub speaker_id: String,
    pub frame_dir: PathBuf,
    pub wav: PathBuf,
    pub n_frames: usize,
    pub fps: f64,
}

impl ManifestEntry {
    pub fn frame_path(&self, index: usize) -> PathBuf {
        self.frame_dir.join(frame_file_name(index))
    }
}

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.png")
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self, MediaError> {
        let m = Self { entries };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), MediaError> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(&e.video_id) {
                return Err(MediaError::Manifest(format!(
                    "duplicate video_id {}",
                    e.video_id
                )));
            }
            if e.n_frames == 0 {
                return Err(MediaError::Manifest(format!(
                    "{}: n_frames must be >= 1",
                    e.video_id
                )));
            }
            if e.fps.is_nan() || e.fps <= 0.0 {
                return Err(MediaError::Manifest(format!(
                    "{}: fps must be > 0",
                    e.video_id
                )));
            }
        }
        Ok(())
    }

    /// Reads a JSON Lines manifest. Relative paths resolve against the
    /// manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MediaError> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let f = std::fs::File::open(path)?;
        let mut entries = Vec::new();
        for (n, line) in std::io::BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut e: ManifestEntry = serde_json::from_str(&line)
                .map_err(|err| MediaError::Manifest(format!("line {}: {err}", n + 1)))?;
            if e.frame_dir.is_relative() {
                e.frame_dir = base.join(&e.frame_dir);
            }
            if e.wav.is_relative() {
                e.wav = base.join(&e.wav);
            }
            entries.push(e);
        }
        Self::new(entries)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), MediaError> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)
                .map_err(|err| MediaError::Manifest(err.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn total_frames(&self) -> usize {
        self.entries.iter().map(|e| e.n_frames).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub name: String,
    pub video_ids: BTreeSet<String>,
    pub role: SplitRole,
}

/// Videos per speaker in each split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerSpeakerCounts {
    pub small: usize,
    pub full: usize,
    pub test: usize,
}

impl Default for PerSpeakerCounts {
    fn default() -> Self {
        Self {
            small: 300,
            full: 980,
            test: 20,
        }
    }
}

/// Builds the small-train, full-train and test splits.
///
/// Per speaker (in sorted order) the videos are shuffled; the first `test`
/// become test videos, the next `full` the full training split, and the
/// small split is the first `small` of those, so small ⊆ full.
pub fn split_dataset<R: Rng + ?Sized>(
    manifest: &CorpusManifest,
    counts: PerSpeakerCounts,
    rng: &mut R,
) -> Result<Vec<DatasetSplit>, MediaError> {
    if counts.small > counts.full {
        return Err(MediaError::InvalidArgument(format!(
            "small split ({}) cannot exceed full split ({})",
            counts.small, counts.full
        )));
    }
    let mut by_speaker: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in &manifest.entries {
        by_speaker
            .entry(&e.speaker_id)
            .or_default()
            .push(&e.video_id);
    }
    let mut small = BTreeSet::new();
    let mut full = BTreeSet::new();
    let mut test = BTreeSet::new();
    for (speaker, mut videos) in by_speaker {
        let need = counts.full + counts.test;
        if videos.len() < need {
            return Err(MediaError::TooFewVideos {
                speaker: speaker.to_string(),
                have: videos.len(),
                need,
            });
        }
        videos.sort_unstable();
        videos.shuffle(rng);
        let (t, rest) = videos.split_at(counts.test);
        test.extend(t.iter().map(|s| s.to_string()));
        let f = &rest[..counts.full];
        full.extend(f.iter().map(|s| s.to_string()));
        small.extend(f[..counts.small].iter().map(|s| s.to_string()));
    }
    Ok(vec![
        DatasetSplit {
            name: "GRIDSmall".into(),
            video_ids: small,
            role: SplitRole::Train,
        },
        DatasetSplit {
            name: "GRIDFull".into(),
            video_ids: full,
            role: SplitRole::Train,
        },
        DatasetSplit {
            name: "GRIDTest".into(),
            video_ids: test,
            role: SplitRole::Test,
        },
    ])
}

/// Reads a `frame_index,x,y,w,h` sidecar file.
pub fn load_bboxes(path: impl AsRef<Path>) -> Result<HashMap<usize, BoundingBox>, MediaError> {
    #[derive(Deserialize)]
    struct Row {
        frame_index: usize,
        x: usize,
        y: usize,
        w: usize,
        h: usize,
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = HashMap::new();
    for row in rdr.deserialize() {
        let r: Row = row?;
        out.insert(
            r.frame_index,
            BoundingBox {
                x: r.x,
                y: r.y,
                w: r.w,
                h: r.h,
            },
        );
    }
    Ok(out)
}
